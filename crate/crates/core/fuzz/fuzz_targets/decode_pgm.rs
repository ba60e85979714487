#![no_main]

use expdim_core::io::{decode_pgm, encode_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_pgm(data) {
        assert_eq!(img.pixels.len(), img.width * img.height);
        assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
    }
});
