#![no_main]

use libfuzzer_sys::fuzz_target;
use smc_core::NormSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<NormSpec>() {
        assert_eq!(spec.to_string().parse::<NormSpec>().ok(), Some(spec));
    }
});
