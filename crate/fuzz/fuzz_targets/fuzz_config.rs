#![no_main]
use libfuzzer_sys::fuzz_target;
use splab::config::{parse_config, EXPERIMENT_NAMES};

// The config parser must reject or accept arbitrary text without panicking,
// for every experiment section it knows about.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for (_, kind) in EXPERIMENT_NAMES {
        let _ = parse_config(text, kind);
    }
});
