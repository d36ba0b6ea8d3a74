//! Run configuration: command-line flags merged over an optional
//! `key=value` file, validated, and hashed for provenance.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

/// A usage problem; the process exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Settings after merging, keyed by long flag name.
#[derive(Clone, Debug, Default)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

/// Keys that never influence results and stay out of the hash.
const UNHASHED: [&str; 2] = ["output", "config"];

impl RunConfig {
    /// Merge `flags` (only those given on the command line) over the
    /// contents of the config file named by `flags["config"]`.
    pub fn merge(command: &str, flags: BTreeMap<String, String>, allowed: &[&str]) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        if let Some(path) = flags.get("config") {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError(format!("cannot read config file {path}: {e}")))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| UsageError(format!("{path}:{}: expected key=value", n + 1)))?;
                let k = k.trim().replace('_', "-");
                if !allowed.contains(&k.as_str()) {
                    return Err(UsageError(format!("{path}:{}: unknown key `{k}` for `{command}`", n + 1)));
                }
                values.insert(k, v.trim().to_string());
            }
        }
        values.extend(flags);
        Ok(RunConfig {
            command: command.to_string(),
            values,
        })
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        self.raw(key).unwrap_or(default).to_string()
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, UsageError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| UsageError(format!("invalid value `{v}` for --{key}"))),
        }
    }

    /// Grid resolution: a power of two in `8..=64`.
    pub fn resolution(&self, default: usize) -> Result<usize, UsageError> {
        let r: usize = self.parse("res", default)?;
        if !(8..=64).contains(&r) || !r.is_power_of_two() {
            return Err(UsageError(format!("--res {r} must be a power of two between 8 and 64")));
        }
        Ok(r)
    }

    /// Jet order `K ∈ {3, 4, 6}`.
    pub fn order(&self, default: usize) -> Result<usize, UsageError> {
        let k: usize = self.parse("order", default)?;
        if ![3, 4, 6].contains(&k) {
            return Err(UsageError(format!("--order {k} must be one of 3, 4, 6")));
        }
        Ok(k)
    }

    /// Record the value actually used, so defaults enter the hash too.
    pub fn resolve(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// First 16 hex digits of the SHA-256 of the canonical settings.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("command={}\n", self.command));
        for (k, v) in &self.values {
            if !UNHASHED.contains(&k.as_str()) {
                h.update(format!("{k}={v}\n"));
            }
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
