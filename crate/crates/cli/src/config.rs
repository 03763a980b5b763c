//! Flat `key = value` configuration and knob resolution.
//!
//! Keys are the long flag names (`H`, `n-paths`, `eps-ladder`, ...). Blank
//! lines and lines starting with `#` are skipped. A value given on the
//! command line wins over the file, which wins over the built-in default.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Every key a config file may set, with a one-line description.
pub const KNOWN_KEYS: &[(&str, &str)] = &[
    ("H", "Hurst index in (0,1)"),
    ("d", "spatial dimension; must match the length of k"),
    ("k", "derivative multi-index, comma separated"),
    ("t", "time horizon"),
    ("eps", "mollification parameter"),
    ("eta", "second mollification parameter (second-moment)"),
    ("rel-tol", "relative quadrature tolerance"),
    ("n-paths", "number of simulated paths"),
    ("n-steps", "grid steps on [0,t]"),
    ("seed", "master seed"),
    ("eps-ladder", "comma separated mollification ladder (clt)"),
    ("y", "evaluation point, comma separated (estimate)"),
    ("order", "moment order"),
    ("antithetic", "pair each path with its negation (estimate)"),
    ("variable", "space or time (holder)"),
    ("lags", "comma separated increments (holder)"),
    ("n-draws", "draws per case and H (bounds-check)"),
    ("hurst-list", "comma separated Hurst indices (bounds-check)"),
    ("max-m", "largest pair-integral order (bounds-check)"),
    ("format", "json, csv, or bin (simulate only)"),
    ("output", "output file; stdout when absent"),
    ("paths-csv", "per-path CSV (clt)"),
    ("threads", "worker threads; DSLT_THREADS when absent"),
];

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::config("config", format!("line {}: expected key = value", no + 1)));
        };
        let key = key.trim();
        if !KNOWN_KEYS.iter().any(|(k, _)| *k == key) {
            return Err(CliError::config(key, format!("line {}: unknown key", no + 1)));
        }
        if out.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(CliError::config(key, format!("line {}: duplicate key", no + 1)));
        }
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Command-line values layered over a config file.
#[derive(Debug, Default)]
pub struct Knobs {
    cli: BTreeMap<&'static str, String>,
    file: BTreeMap<String, String>,
}

impl Knobs {
    pub fn new(file: BTreeMap<String, String>) -> Self {
        Knobs { cli: BTreeMap::new(), file }
    }

    pub fn set(&mut self, key: &'static str, value: &Option<String>) {
        if let Some(v) = value {
            self.cli.insert(key, v.clone());
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.cli.get(key).or_else(|| self.file.get(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &'static str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|s| s.parse::<T>().map_err(|e| CliError::validation(key, format!("cannot parse {s:?}: {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &'static str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn list<T: FromStr>(&self, key: &'static str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(s) = self.raw(key) else { return Ok(None) };
        s.split(',')
            .map(|p| {
                let p = p.trim();
                p.parse::<T>().map_err(|e| CliError::validation(key, format!("cannot parse {p:?}: {e}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn string(&self, key: &'static str) -> Option<String> {
        self.raw(key).map(str::to_string)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let m = parse_config("# run\nH = 0.4\n\nn-paths=10\n").unwrap();
        assert_eq!(m["H"], "0.4");
        assert_eq!(m["n-paths"], "10");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(parse_config("hurst = 0.4"), Err(CliError::Config { field, .. }) if field == "hurst"));
        assert!(parse_config("H = 0.4\nH = 0.5").is_err());
        assert!(parse_config("H 0.4").is_err());
    }

    #[test]
    fn cli_beats_file_beats_default() {
        let mut k = Knobs::new(parse_config("H = 0.4\nt = 2").unwrap());
        k.set("H", &Some("0.3".into()));
        assert_eq!(k.get_or::<f64>("H", 0.5).unwrap(), 0.3);
        assert_eq!(k.get_or::<f64>("t", 1.0).unwrap(), 2.0);
        assert_eq!(k.get_or::<f64>("eps", 0.01).unwrap(), 0.01);
        assert!(k.list::<u32>("k").unwrap().is_none());
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut k = Knobs::default();
        k.set("k", &Some("1,x".into()));
        let err = k.list::<u32>("k").unwrap_err();
        assert_eq!(err.field(), Some("k"));
    }
}
