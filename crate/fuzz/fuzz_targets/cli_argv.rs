#![no_main]

use compass_cli::{parse, CliError};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // NUL-separated arguments after the program name.
    let argv = std::iter::once("compass").chain(text.split('\0'));
    match parse(argv) {
        Ok(_) => {}
        Err(e) => assert!(matches!(e, CliError::Usage(_))),
    }
});
