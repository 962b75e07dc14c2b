#![no_main]

use compass_core::grid::WignerGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(grid) = WignerGrid::from_binary(data) {
        let again = WignerGrid::from_binary(&grid.to_binary()).expect("re-encoded grid decodes");
        assert_eq!(again.spec(), grid.spec());
        let same = again
            .values()
            .iter()
            .zip(grid.values())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }
});
