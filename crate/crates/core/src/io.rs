//! Text and image formats read by the command line tool.
//!
//! Every decoder here is total: malformed input yields an [`IoError`], never a panic.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::symbolic::Itinerary;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IoError {
    #[error("bad complex number {0:?}: expected \"re,im\"")]
    Complex(String),
    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("itinerary: {0}")]
    Itinerary(String),
    #[error("pgm: {0}")]
    Pgm(String),
}

/// `"re,im"` with optional surrounding whitespace; both parts finite.
pub fn parse_complex(s: &str) -> Result<Complex64, IoError> {
    let bad = || IoError::Complex(s.chars().take(64).collect());
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let re: f64 = a.trim().parse().map_err(|_| bad())?;
    let im: f64 = b.trim().parse().map_err(|_| bad())?;
    if !re.is_finite() || !im.is_finite() {
        return Err(bad());
    }
    Ok(Complex64::new(re, im))
}

/// `key = value` lines; `#` starts a comment, blank lines are skipped, keys are unique.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, IoError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| IoError::Config { line: i + 1, msg: msg.to_string() };
        let (k, v) = line.split_once('=').ok_or_else(|| err("missing '='"))?;
        let k = k.trim();
        if k.is_empty() || !k.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(err("key must be [A-Za-z0-9_-]+"));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(err("duplicate key"));
        }
    }
    Ok(out)
}

pub fn format_config(map: &BTreeMap<String, String>) -> String {
    map.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Comma-separated strip indices on one line; whitespace around entries is allowed.
pub fn parse_itinerary_csv(s: &str) -> Result<Itinerary, IoError> {
    let body = s.trim();
    if body.is_empty() {
        return Ok(Itinerary(Vec::new()));
    }
    body.split(',')
        .map(|t| t.trim().parse::<i64>().map_err(|_| IoError::Itinerary(format!("bad entry {:?}", t.chars().take(32).collect::<String>()))))
        .collect::<Result<Vec<_>, _>>()
        .map(Itinerary)
}

pub fn format_itinerary_csv(it: &Itinerary) -> String {
    it.0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

/// Binary `P5` with maxval 255.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    assert_eq!(img.pixels.len(), img.width * img.height);
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Largest side accepted by the decoder; keeps hostile headers from allocating.
pub const PGM_MAX_SIDE: usize = 1 << 15;

/// Binary `P5`, 8-bit (`maxval ≤ 255`), with `#` comments allowed in the header.
pub fn decode_pgm(bytes: &[u8]) -> Result<GrayImage, IoError> {
    let err = |m: &str| IoError::Pgm(m.to_string());
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(err("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in fields.iter_mut() {
        // Whitespace and comments before each header field.
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        if pos == start || pos - start > 9 {
            return Err(err("bad header number"));
        }
        *f = std::str::from_utf8(&bytes[start..pos]).unwrap().parse().map_err(|_| err("bad header number"))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(err("header not terminated"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 || width > PGM_MAX_SIDE || height > PGM_MAX_SIDE {
        return Err(err("dimensions out of range"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(err("only 8-bit maxval supported"));
    }
    let n = width * height;
    let raster = &bytes[pos..];
    if raster.len() != n {
        return Err(err("raster length does not match header"));
    }
    if raster.iter().any(|&b| b as usize > maxval) {
        return Err(err("sample above maxval"));
    }
    Ok(GrayImage { width, height, pixels: raster.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complex_examples() {
        assert_eq!(parse_complex("-5,0").unwrap(), Complex64::new(-5.0, 0.0));
        assert_eq!(parse_complex(" 1.5e-3 , -2 ").unwrap(), Complex64::new(1.5e-3, -2.0));
        for bad in ["", "5", "1,2,3", "nan,0", "inf,1", "a,b", ","] {
            assert!(parse_complex(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn config_examples() {
        let m = parse_config("# header\nlambda = -5,0\n\nmax_iter=500 # budget\n").unwrap();
        assert_eq!(m["lambda"], "-5,0");
        assert_eq!(m["max_iter"], "500");
        assert!(matches!(parse_config("a=1\na=2"), Err(IoError::Config { line: 2, .. })));
        assert!(parse_config("novalue").is_err());
        assert!(parse_config("bad key=1").is_err());
    }

    #[test]
    fn itinerary_examples() {
        assert_eq!(parse_itinerary_csv("0, -3,12\n").unwrap(), Itinerary(vec![0, -3, 12]));
        assert_eq!(parse_itinerary_csv("").unwrap(), Itinerary(vec![]));
        assert!(parse_itinerary_csv("1,,2").is_err());
        assert!(parse_itinerary_csv("99999999999999999999").is_err());
    }

    #[test]
    fn pgm_with_comment_header() {
        let mut bytes = b"P5\n# made by hand\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 10, 200, 255]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!((img.width, img.height), (2, 2));
        assert_eq!(img.pixels, vec![0, 10, 200, 255]);
    }

    #[test]
    fn pgm_rejects_malformed() {
        assert!(decode_pgm(b"P6\n1 1\n255\n\0").is_err());
        assert!(decode_pgm(b"P5\n1 1\n255\n").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\0\0").is_err());
        assert!(decode_pgm(b"P5\n99999 99999\n255\n").is_err());
        assert!(decode_pgm(b"P5\n1 1\n100\n\xff").is_err());
        assert!(decode_pgm(b"P5 1 1 255").is_err());
    }

    proptest! {
        #[test]
        fn complex_round_trip(re in -1e300f64..1e300, im in -1e300f64..1e300) {
            let z = parse_complex(&format!("{re:e},{im:e}")).unwrap();
            prop_assert_eq!(z, Complex64::new(re, im));
        }

        #[test]
        fn config_round_trip(m in proptest::collection::btree_map("[a-z_][a-z0-9_-]{0,8}", "[ -~&&[^#=]]{0,12}", 0..8)) {
            let trimmed: BTreeMap<String, String> = m.into_iter().map(|(k, v)| (k, v.trim().to_string())).collect();
            prop_assert_eq!(parse_config(&format_config(&trimmed)).unwrap(), trimmed);
        }

        #[test]
        fn itinerary_round_trip(v in proptest::collection::vec(any::<i64>(), 0..40)) {
            let it = Itinerary(v);
            prop_assert_eq!(parse_itinerary_csv(&format_itinerary_csv(&it)).unwrap(), it);
        }

        #[test]
        fn pgm_round_trip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 7) as u8).collect();
            let img = GrayImage { width: w, height: h, pixels };
            prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        }

        #[test]
        fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let s = String::from_utf8_lossy(&bytes);
            let _ = parse_complex(&s);
            let _ = parse_config(&s);
            let _ = parse_itinerary_csv(&s);
            let _ = decode_pgm(&bytes);
            let mut p5 = b"P5 ".to_vec();
            p5.extend_from_slice(&bytes);
            let _ = decode_pgm(&p5);
        }
    }
}
