#![no_main]

use compass_cli::{ConfigFile, RunConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(file) = ConfigFile::from_json(text) else {
        return;
    };
    let json = serde_json::to_string(&file).expect("config serializes");
    assert_eq!(ConfigFile::from_json(&json).ok().as_ref(), Some(&file));
    if let Ok(cfg) = RunConfig::resolve(file) {
        if let Some(taus) = &cfg.tau_schedule {
            assert!(taus.windows(2).all(|w| w[0] <= w[1]));
        }
        if let Some(n) = cfg.grid_n {
            assert!(n % 2 == 1);
        }
    }
});
