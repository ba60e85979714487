//! Resolution of run parameters: command-line flag, then config file, then default.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use expdim_core::io::{parse_complex, parse_config};
use expdim_core::Complex64;

use crate::CliError;

pub struct Resolver {
    file: BTreeMap<String, String>,
    seen: BTreeSet<String>,
    /// Every key consulted, with the value actually used.
    pub resolved: BTreeMap<String, String>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            None => BTreeMap::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text).map_err(|e| CliError::Usage(e.to_string()))?
            }
        };
        Ok(Resolver { file, seen: BTreeSet::new(), resolved: BTreeMap::new() })
    }

    fn raw(&mut self, key: &str, flag: Option<&String>, default: Option<&str>) -> Option<String> {
        self.seen.insert(key.to_string());
        let v = flag.cloned().or_else(|| self.file.get(key).cloned()).or(default.map(str::to_string));
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.clone());
        }
        v
    }

    pub fn required<T>(&mut self, key: &str, flag: Option<&String>, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        let v = self
            .raw(key, flag, None)
            .ok_or_else(|| CliError::Usage(format!("missing required parameter `{key}` (flag --{} or config key)", key.replace('_', "-"))))?;
        parse(&v).map_err(|e| CliError::Usage(format!("{key}: {e}")))
    }

    pub fn or<T>(&mut self, key: &str, flag: Option<&String>, default: &str, parse: impl Fn(&str) -> Result<T, String>) -> Result<T, CliError> {
        let v = self.raw(key, flag, Some(default)).expect("default present");
        parse(&v).map_err(|e| CliError::Usage(format!("{key}: {e}")))
    }

    pub fn optional<T>(&mut self, key: &str, flag: Option<&String>, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
        self.raw(key, flag, None)
            .map(|v| parse(&v).map_err(|e| CliError::Usage(format!("{key}: {e}"))))
            .transpose()
    }

    /// Config keys nobody asked for are typos; refuse them.
    pub fn finish(self) -> Result<BTreeMap<String, String>, CliError> {
        if let Some(k) = self.file.keys().find(|k| !self.seen.contains(*k)) {
            return Err(CliError::Usage(format!("unknown config key `{k}`")));
        }
        Ok(self.resolved)
    }
}

pub fn num<T: FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("cannot parse {s:?}"))
}

pub fn finite(s: &str) -> Result<f64, String> {
    let v: f64 = num(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

pub fn complex(s: &str) -> Result<Complex64, String> {
    parse_complex(s).map_err(|e| e.to_string())
}

pub fn list_f64(s: &str) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(',').map(finite).collect::<Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

pub fn boolean(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(format!("{s:?} is not a boolean")),
    }
}

/// `x_min,x_max,y_min,y_max`.
pub fn window(s: &str) -> Result<[f64; 4], String> {
    let v = list_f64(s)?;
    <[f64; 4]>::try_from(v).map_err(|_| "window needs four numbers x_min,x_max,y_min,y_max".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let mut r = Resolver { file: parse_config("a = 2\nb = 3\n").unwrap(), seen: Default::default(), resolved: Default::default() };
        let flag = "1".to_string();
        assert_eq!(r.or("a", Some(&flag), "9", num::<i32>).unwrap(), 1);
        assert_eq!(r.or("b", None, "9", num::<i32>).unwrap(), 3);
        assert_eq!(r.or("c", None, "9", num::<i32>).unwrap(), 9);
        let res = r.finish().unwrap();
        assert_eq!(res["a"], "1");
        assert_eq!(res["c"], "9");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let r = Resolver { file: parse_config("typo = 1").unwrap(), seen: Default::default(), resolved: Default::default() };
        assert!(r.finish().is_err());
    }

    #[test]
    fn window_parsing() {
        assert_eq!(window("-3,7,-5,5").unwrap(), [-3.0, 7.0, -5.0, 5.0]);
        assert!(window("1,2,3").is_err());
        assert!(list_f64("1,inf").is_err());
    }
}
