#![no_main]

use expdim_core::io::{format_itinerary_csv, parse_itinerary_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(it) = parse_itinerary_csv(s) {
            assert_eq!(parse_itinerary_csv(&format_itinerary_csv(&it)).unwrap(), it);
        }
    }
});
