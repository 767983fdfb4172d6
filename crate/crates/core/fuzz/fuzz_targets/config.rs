#![no_main]

use hmm_core::runner::{parse_config, render_config, SimConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(map) = parse_config(text) else {
        return;
    };
    assert_eq!(parse_config(&render_config(&map)).unwrap(), map);
    // Validation may reject the map but must not panic.
    let _ = SimConfig::from_map(&map);
});
