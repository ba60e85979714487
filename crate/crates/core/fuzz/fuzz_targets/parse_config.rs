#![no_main]

use expdim_core::io::{format_config, parse_config};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(map) = parse_config(s) {
            // Values never contain '#', so formatting is lossless.
            assert_eq!(parse_config(&format_config(&map)).unwrap(), map);
        }
    }
});
