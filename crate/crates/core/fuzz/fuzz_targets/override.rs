#![no_main]

use hmm_core::runner::{parse_config, parse_override, render_config, ConfigMap};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok((key, value)) = parse_override(data) {
        let mut map = ConfigMap::new();
        map.insert(key, value);
        assert_eq!(parse_config(&render_config(&map)).unwrap(), map);
    }
});
