//! Service configuration: a TOML file plus `LINKRISK_*` environment overrides.

use std::path::{Path, PathBuf};

use linkrisk_core::corpus::DEFAULT_RECORD_CAP;
use linkrisk_core::disclosure::{NmiNormalization, NumericMatch};
use linkrisk_core::pairrisk::{DEFAULT_ALPHA, DEFAULT_KEY_SIZE};
use linkrisk_core::vulnerability::DEFAULT_VULNERABLE_THRESHOLD;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid value {value:?} for {var}")]
    Env { var: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub host: String,
    pub port: u16,
    pub cache_dir: PathBuf,
    pub record_cap: usize,
    pub truncate: bool,
    pub alpha: f64,
    pub key_size: usize,
    pub vulnerable_threshold: usize,
    pub nmi: NmiNormalization,
    pub numeric_match: NumericMatch,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            cache_dir: PathBuf::from(".linkrisk"),
            record_cap: DEFAULT_RECORD_CAP,
            truncate: false,
            alpha: DEFAULT_ALPHA,
            key_size: DEFAULT_KEY_SIZE,
            vulnerable_threshold: DEFAULT_VULNERABLE_THRESHOLD,
            nmi: NmiNormalization::default(),
            numeric_match: NumericMatch::default(),
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(var: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env {
        var: var.into(),
        value: value.into(),
    })
}

fn parse_enum<T: for<'de> Deserialize<'de>>(var: &str, value: &str) -> Result<T, ConfigError> {
    serde_json::from_value(serde_json::Value::String(value.trim().to_lowercase())).map_err(|_| {
        ConfigError::Env {
            var: var.into(),
            value: value.into(),
        }
    })
}

impl Config {
    /// Read `path` if given, then apply environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                    path: p.to_path_buf(),
                    source,
                })?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn apply_env<I: IntoIterator<Item = (String, String)>>(
        &mut self,
        vars: I,
    ) -> Result<(), ConfigError> {
        for (var, value) in vars {
            let Some(field) = var.strip_prefix("LINKRISK_") else {
                continue;
            };
            match field {
                "HOST" => self.host = value,
                "PORT" => self.port = parse(&var, &value)?,
                "CACHE_DIR" => self.cache_dir = PathBuf::from(value),
                "RECORD_CAP" => self.record_cap = parse(&var, &value)?,
                "TRUNCATE" => self.truncate = parse(&var, &value)?,
                "ALPHA" => self.alpha = parse(&var, &value)?,
                "KEY_SIZE" => self.key_size = parse(&var, &value)?,
                "VULNERABLE_THRESHOLD" => self.vulnerable_threshold = parse(&var, &value)?,
                "NMI" => self.nmi = parse_enum(&var, &value)?,
                "NUMERIC_MATCH" => self.numeric_match = parse_enum(&var, &value)?,
                "SEED" => self.seed = parse(&var, &value)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn snapshot_path(&self) -> PathBuf {
        self.cache_dir.join("snapshot.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_defaults() {
        let cfg = Config::from_toml("port = 9000\nnmi = \"max\"\n").unwrap();
        assert_eq!(cfg.port, 9000);
        assert_eq!(cfg.nmi, NmiNormalization::Max);
        assert_eq!(cfg.alpha, 50.0);
        assert_eq!(cfg.record_cap, 100_000);
    }

    #[test]
    fn env_overrides() {
        let mut cfg = Config::default();
        cfg.apply_env([
            ("LINKRISK_PORT".to_string(), "7000".to_string()),
            ("LINKRISK_NUMERIC_MATCH".to_string(), "Exact".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ])
        .unwrap();
        assert_eq!(cfg.port, 7000);
        assert_eq!(cfg.numeric_match, NumericMatch::Exact);
        let err = cfg.apply_env([("LINKRISK_ALPHA".to_string(), "lots".to_string())]);
        assert!(matches!(err, Err(ConfigError::Env { .. })));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            Config::from_toml("prot = 1"),
            Err(ConfigError::Parse(_))
        ));
    }
}
