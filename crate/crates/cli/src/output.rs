//! Output files and the manifest that hashes them.
//!
//! Nothing touches the disk until a run has fully succeeded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const OUT_ENV: &str = "EXPDIM_OUT";
pub const DEFAULT_OUT: &str = "expdim-out";

pub fn out_dir(flag: Option<&PathBuf>) -> PathBuf {
    flag.cloned()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct FileEntry {
    file: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    config: &'a BTreeMap<String, String>,
    outputs: Vec<FileEntry>,
    /// Hash of the `name:sha256` lines of all outputs, in order.
    content_hash: String,
}

/// Files of one run, written together with `<subcommand>.manifest.json`.
pub struct Bundle {
    subcommand: &'static str,
    files: Vec<(String, Vec<u8>)>,
}

impl Bundle {
    pub fn new(subcommand: &'static str) -> Self {
        Bundle { subcommand, files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
        bytes.push(b'\n');
        self.add(name, bytes);
    }

    pub fn write(self, dir: &Path, config: &BTreeMap<String, String>) -> Result<String, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut outputs = Vec::new();
        let mut chain = String::new();
        for (name, bytes) in &self.files {
            let sha = sha256_hex(bytes);
            chain.push_str(&format!("{name}:{sha}\n"));
            outputs.push(FileEntry { file: name.clone(), bytes: bytes.len(), sha256: sha });
            std::fs::write(dir.join(name), bytes).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        }
        let content_hash = sha256_hex(chain.as_bytes());
        let manifest = Manifest {
            subcommand: self.subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config,
            outputs,
            content_hash: content_hash.clone(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        bytes.push(b'\n');
        let name = format!("{}.manifest.json", self.subcommand);
        std::fs::write(dir.join(&name), bytes).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        Ok(content_hash)
    }
}

/// Shortest round-trip decimal; `inf`/`NaN` spelled out.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

pub fn png_gray(width: usize, height: usize, pixels: &[u8]) -> Vec<u8> {
    use image::ImageEncoder;
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(pixels, width as u32, height as u32, image::ExtendedColorType::L8)
        .expect("in-memory png");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn bundle_is_reproducible() {
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let cfg = BTreeMap::from([("lambda".to_string(), "-5,0".to_string())]);
        let hashes: Vec<String> = dirs
            .iter()
            .map(|d| {
                let mut b = Bundle::new("t");
                b.add("a.csv", csv(&["x"], &[vec!["1".into()]]));
                b.add("b.png", png_gray(2, 2, &[0, 1, 2, 3]));
                b.write(d.path(), &cfg).unwrap()
            })
            .collect();
        assert_eq!(hashes[0], hashes[1]);
        let m0 = std::fs::read(dirs[0].path().join("t.manifest.json")).unwrap();
        let m1 = std::fs::read(dirs[1].path().join("t.manifest.json")).unwrap();
        assert_eq!(m0, m1);
    }
}
