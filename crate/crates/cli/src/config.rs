//! Flat `key = value` run configuration. Keys are the long flag names
//! (`nu-grid`, `kmax`, ...); underscores are accepted for dashes. A flag on
//! the command line always wins over the file.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Settings {
    entries: BTreeMap<String, (String, usize)>,
    /// Keys looked up by the running subcommand; anything else in the file
    /// is rejected by [`Settings::finish`].
    queried: RefCell<BTreeSet<String>>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", idx + 1)))?;
            let key = normalize(key);
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {}: empty key", idx + 1)));
            }
            if entries.insert(key.clone(), (value.trim().to_string(), idx + 1)).is_some() {
                return Err(CliError::Usage(format!("config line {}: duplicate key {key}", idx + 1)));
            }
        }
        Ok(Self { entries, queried: RefCell::default() })
    }

    /// The flag value if given, else the parsed config value, else `None`.
    pub fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.queried.borrow_mut().insert(key.to_string());
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None => Ok(None),
            Some((value, line)) => value
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config line {line}: bad value for {key}: {e}"))),
        }
    }

    pub fn or<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.get(key, flag)?.unwrap_or(default))
    }

    /// A switch: set by the flag, or by `true`/`false` in the file.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.get::<bool>(key, None)?.unwrap_or(false))
    }

    /// Rejects config keys the subcommand never asked for.
    pub fn finish(&self) -> Result<(), CliError> {
        let queried = self.queried.borrow();
        let unknown: Vec<String> = self
            .entries
            .iter()
            .filter(|(k, _)| !queried.contains(*k))
            .map(|(k, (_, line))| format!("{k} (line {line})"))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("unknown config key(s): {}", unknown.join(", "))))
        }
    }
}

/// Comma-separated list such as `0.2,0.1,0.05`.
pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("bad number {s:?} in list: {e}"))))
        .collect()
}

/// `lo:hi:step`.
pub fn parse_range(text: &str) -> Result<(f64, f64, f64), CliError> {
    let parts = parse_list(&text.replace(':', ","))?;
    match parts[..] {
        [lo, hi, step] => Ok((lo, hi, step)),
        _ => Err(CliError::Usage(format!("expected lo:hi:step, got {text:?}"))),
    }
}
