#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use smc_core::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ExperimentConfig::from_toml_str(text, Path::new("."));
});
