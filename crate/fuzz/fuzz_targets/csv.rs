#![no_main]

use libfuzzer_sys::fuzz_target;
use smc_core::io::{parse_csv, write_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(x) = parse_csv(text) {
        let y = parse_csv(&write_csv(&x)).expect("written data parses");
        assert_eq!(x.shape(), y.shape());
    }
});
