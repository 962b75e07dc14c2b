#![no_main]

use compass_core::grid::WignerGrid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = WignerGrid::from_csv(text) {
        // Anything accepted must survive its own encoding.
        let again = WignerGrid::from_csv(&grid.to_csv(false)).expect("re-encoded grid parses");
        assert_eq!(again.spec().nx, grid.spec().nx);
        assert_eq!(again.spec().ny, grid.spec().ny);
    }
});
