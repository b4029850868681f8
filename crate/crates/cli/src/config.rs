//! Flat `key=value` run configuration. Command-line flags win over file
//! values; keys use the long flag names (`p-m`, `gamma-star`, ...), with
//! `_` accepted for `-`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::CliError;

/// Every key any subcommand reads.
const KNOWN_KEYS: &[&str] = &[
    "base",
    "budget",
    "bruteforce",
    "cost",
    "count",
    "curve",
    "d-max",
    "gamma-max",
    "gamma-star",
    "grid-steps",
    "len",
    "max-demand",
    "max-len",
    "out",
    "overwrite",
    "p-M",
    "p-m",
    "seed",
    "seeds",
    "spike-height",
    "spike-prob",
    "static",
    "tau",
    "taus",
    "trace",
    "windows",
];

#[derive(Debug, Default)]
pub struct Config {
    source: String,
    values: BTreeMap<String, (String, usize)>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{source}:{}: expected key=value",
                    i + 1
                )));
            };
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "{source}:{}: unknown key {key:?}",
                    i + 1
                )));
            }
            values.insert(key, (v.trim().to_string(), i + 1));
        }
        Ok(Config {
            source: source.to_string(),
            values,
        })
    }

    /// The flag if given, else the parsed file value.
    pub fn pick<T>(
        &self,
        key: &str,
        flag: Option<T>,
        parse: fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => parse(v)
                .map(Some)
                .map_err(|e| CliError::Usage(format!("{}:{line}: {key}: {e}", self.source))),
        }
    }

    pub fn require<T>(
        &self,
        key: &str,
        flag: Option<T>,
        parse: fn(&str) -> Result<T, String>,
    ) -> Result<T, CliError> {
        self.pick(key, flag, parse)?
            .ok_or_else(|| CliError::Usage(format!("missing --{key} (flag or config key)")))
    }

    pub fn or<T>(
        &self,
        key: &str,
        flag: Option<T>,
        parse: fn(&str) -> Result<T, String>,
        default: T,
    ) -> Result<T, CliError> {
        Ok(self.pick(key, flag, parse)?.unwrap_or(default))
    }

    /// Boolean switches are on if either the flag or the file says so.
    pub fn switch(&self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.pick(key, None, parse_bool)?.unwrap_or(false))
    }
}

/// A decimal number or a fraction such as `1/12`.
pub fn parse_num(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
            if d == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            n / d
        }
        None => s.parse().map_err(|_| format!("bad number {s:?}"))?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{s:?} is not finite"))
    }
}

pub fn parse_nums(s: &str) -> Result<Vec<f64>, String> {
    split_list(s).map(parse_num).collect()
}

pub fn parse_count(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("bad integer {s:?}"))
}

pub fn parse_counts(s: &str) -> Result<Vec<usize>, String> {
    split_list(s).map(parse_count).collect()
}

pub fn parse_u64(s: &str) -> Result<u64, String> {
    s.trim().parse().map_err(|_| format!("bad integer {s:?}"))
}

pub fn parse_u128(s: &str) -> Result<u128, String> {
    let v = parse_num(s)?;
    if v < 0.0 || v.fract() != 0.0 {
        return Err(format!("bad count {s:?}"));
    }
    Ok(v as u128)
}

pub fn parse_path(s: &str) -> Result<PathBuf, String> {
    Ok(PathBuf::from(s.trim()))
}

pub fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got {other:?}")),
    }
}

/// Prediction windows: an explicit list, or every window below the cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum Windows {
    All,
    List(Vec<usize>),
}

impl Windows {
    /// Windows to run when the billing cycle is at most `tau`.
    pub fn resolve(&self, tau: usize) -> Vec<usize> {
        match self {
            Windows::All => (0..tau).collect(),
            Windows::List(w) => w.clone(),
        }
    }
}

pub fn parse_windows(s: &str) -> Result<Windows, String> {
    if s.trim() == "all" {
        Ok(Windows::All)
    } else {
        parse_counts(s).map(Windows::List)
    }
}

/// Comma-separated items; an empty string yields no items.
fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}
