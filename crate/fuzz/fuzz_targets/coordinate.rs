#![no_main]

use libfuzzer_sys::fuzz_target;
use smc_core::io::{parse_coordinate, write_coordinate};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((omega, y)) = parse_coordinate(text) {
        // Anything that parses must survive a write/read cycle.
        let again = write_coordinate(&omega, &y).expect("parsed data is writable");
        let (o2, y2) = parse_coordinate(&again).expect("written data parses");
        assert_eq!(o2, omega);
        assert_eq!(y2, y);
    }
});
