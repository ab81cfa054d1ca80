//! Plain-text `key=value` parameter files.
//!
//! ```text
//! # reference run
//! hbar = 0.1
//! omega = 1
//! epsilon = 3
//! q = 2
//! ```

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::LatticeParams;

pub const KNOWN_KEYS: [&str; 7] = ["hbar", "omega", "epsilon", "q", "r", "f0", "seed"];
pub const REQUIRED_KEYS: [&str; 4] = ["hbar", "omega", "epsilon", "q"];

/// Splits `key=value` lines. Blank lines and `#` comments are skipped;
/// duplicate keys are rejected.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "line {}: expected key=value, got `{}`",
                lineno + 1,
                raw.trim()
            ))
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!(
                "line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

/// Parameter file contents after validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamFile {
    pub params: LatticeParams,
    pub seed: u64,
    /// True when `f0` came from the file rather than the resonance condition.
    pub f0_override: bool,
}

impl ParamFile {
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_map(&parse_key_values(text)?)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let unknown: Vec<&str> = map
            .keys()
            .map(String::as_str)
            .filter(|k| !KNOWN_KEYS.contains(k))
            .collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!(
                "unknown keys: {}",
                unknown.join(",")
            )));
        }
        let missing: Vec<&str> = REQUIRED_KEYS
            .iter()
            .copied()
            .filter(|k| !map.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "missing keys: {}",
                missing.join(",")
            )));
        }

        let hbar = get_f64(map, "hbar")?.unwrap_or_default();
        let omega = get_f64(map, "omega")?.unwrap_or_default();
        let epsilon = get_f64(map, "epsilon")?.unwrap_or_default();
        let q = get_u32(map, "q")?.unwrap_or_default();
        let r = get_u32(map, "r")?.unwrap_or(1);
        let seed = match map.get("seed") {
            Some(v) => v
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("key `seed`: {e}")))?,
            None => 0,
        };
        let (params, f0_override) = match get_f64(map, "f0")? {
            Some(f0) => (
                LatticeParams::with_static_force(hbar, omega, epsilon, f0, q, r)?,
                true,
            ),
            None => (LatticeParams::resonant(hbar, omega, epsilon, q, r)?, false),
        };
        Ok(Self {
            params,
            seed,
            f0_override,
        })
    }
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    map.get(key)
        .map(|v| {
            v.parse::<f64>()
                .map_err(|e| Error::Config(format!("key `{key}`: {e}")))
        })
        .transpose()
}

fn get_u32(map: &BTreeMap<String, String>, key: &str) -> Result<Option<u32>> {
    map.get(key)
        .map(|v| {
            v.parse::<u32>()
                .map_err(|e| Error::Config(format!("key `{key}`: {e}")))
        })
        .transpose()
}
