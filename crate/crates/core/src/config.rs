//! `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Values given on the command line override the file; the file overrides
//! built-in defaults.
//!
//! ```text
//! # audit settings
//! k_hops = 2
//! threshold = fixed:0.97
//! seed = 7
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Keys accepted in a configuration file.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "k_hops",
    "threshold",
    "synthetic_ratio",
    "k_base",
    "base_epochs",
    "base_step",
    "detector_step",
    "detector_epochs",
    "detector_patience",
    "bind",
    "port",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    path: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `key = value`"))?;
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::parse(path, i + 1, format!("unknown key `{k}`")));
            }
            if values.insert(k.to_string(), (i + 1, v.trim().to_string())).is_some() {
                return Err(Error::parse(path, i + 1, format!("key `{k}` set twice")));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            values,
        })
    }

    /// Typed lookup; `None` when the key is absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::parse(&self.path, *line, format!("`{key}`: {e}"))),
        }
    }

    /// `cli`, else the file's value, else `default`.
    pub fn resolve<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile> {
        ConfigFile::parse(Path::new("audit.conf"), text)
    }

    #[test]
    fn precedence() {
        let c = parse("# comment\nk_hops = 3  # trailing\n\nseed=9\n").unwrap();
        assert_eq!(c.resolve(None, "k_hops", 2usize).unwrap(), 3);
        assert_eq!(c.resolve(Some(1), "k_hops", 2usize).unwrap(), 1);
        assert_eq!(c.resolve(None, "port", 8080u16).unwrap(), 8080);
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(9));
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(parse("seed = 1\nnope = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("k_hops"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("seed=1\nseed=2"), Err(Error::Parse { line: 2, .. })));
        let c = parse("\nk_hops = two").unwrap();
        assert!(matches!(c.get::<usize>("k_hops"), Err(Error::Parse { line: 2, .. })));
    }
}
