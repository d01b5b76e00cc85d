//! Layering of command-line flags over a TOML config file over built-in defaults.
//!
//! A config file holds top-level keys shared by every subcommand (typically
//! `seed`) and one table per subcommand:
//!
//! ```toml
//! seed = 7
//!
//! [train]
//! epochs = 10
//! classes = [0, 1]
//! ```
//!
//! Keys use the flag names with `_` in place of `-`.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;

use crate::error::{usage, CliError};

pub const SEED_ENV: &str = "RECESS_SEED";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Default)]
pub struct Config {
    shared: toml::Table,
    section: toml::Table,
}

impl Config {
    pub fn load(path: Option<&Path>, section: &str) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, section).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn parse(text: &str, section: &str) -> Result<Self, CliError> {
        let mut shared: toml::Table = text.parse().map_err(|e| usage(format!("{e}")))?;
        let section = match shared.remove(section) {
            Some(toml::Value::Table(t)) => t,
            Some(_) => return Err(usage(format!("`{section}` must be a table"))),
            None => toml::Table::new(),
        };
        shared.retain(|_, v| !v.is_table());
        Ok(Config { shared, section })
    }

    fn lookup(&self, key: &str) -> Option<&toml::Value> {
        self.section.get(key).or_else(|| self.shared.get(key))
    }

    pub fn get<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.lookup(key)
            .map(|v| {
                v.clone()
                    .try_into::<T>()
                    .map_err(|e| usage(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    /// Like [`Config::get`] for types written as strings, e.g. predictor specs.
    pub fn get_parsed<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get::<String>(key)?
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| usage(format!("config key `{key}`: {e}")))
            })
            .transpose()
    }

    /// Flag if given, else config value, else `default`.
    pub fn pick<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    /// Flag if given, else config value; missing both is a usage error.
    pub fn require<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<T, CliError> {
        match flag {
            Some(v) => Ok(v),
            None => self
                .get(key)?
                .ok_or_else(|| usage(format!("missing --{}", key.replace('_', "-")))),
        }
    }

    /// Flag, then config, then `RECESS_SEED`, then 42.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64, CliError> {
        if let Some(seed) = flag {
            return Ok(seed);
        }
        if let Some(seed) = self.get("seed")? {
            return Ok(seed);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| usage(format!("{SEED_ENV}=`{v}` is not an unsigned integer"))),
            Err(std::env::VarError::NotPresent) => Ok(DEFAULT_SEED),
            Err(e) => Err(usage(format!("{SEED_ENV}: {e}"))),
        }
    }
}
