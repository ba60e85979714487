#![no_main]

use expdim_core::io::parse_complex;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(z) = parse_complex(s) {
            assert!(z.re.is_finite() && z.im.is_finite());
            let again = parse_complex(&format!("{:e},{:e}", z.re, z.im)).unwrap();
            assert_eq!(again, z);
        }
    }
});
