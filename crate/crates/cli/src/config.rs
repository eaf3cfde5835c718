//! Optional `key=value` configuration file. Command-line flags win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::Failure;

pub const KEYS: &[&str] = &[
    "family",
    "k",
    "alpha",
    "alpha-min",
    "alpha-max",
    "steps",
    "eta",
    "nu",
    "variant",
    "trials",
    "seed",
    "matching",
    "output",
    "plot",
    "tol",
    "max-iter",
    "samples",
    "preset",
];

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("config line {}: expected key=value", i + 1)))?;
            let key = k.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(Failure::usage(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Flag value, else config value, else `None`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Failure::usage(format!("config key {key}: cannot parse {s:?}"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, Failure> {
        Ok(self.pick(key, flag)?.unwrap_or(default))
    }
}
