//! Flat `key = value` run manifests: resolved configuration, input digests
//! and tool version.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::trainer::TrainConfig;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Keys are kept sorted so the text form is canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunManifest {
    entries: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Manifest stamped with the tool version.
    pub fn for_tool() -> Self {
        let mut m = Self::new();
        m.set("tool.version", TOOL_VERSION);
        m
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records `input.<name>.path` and `input.<name>.sha256`.
    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.set(format!("input.{name}.path"), path.display());
        self.set(format!("input.{name}.sha256"), digest);
        Ok(())
    }

    pub fn add_output(&mut self, name: &str, path: &Path) {
        self.set(format!("output.{name}"), path.display());
    }

    pub fn set_train_config(&mut self, cfg: &TrainConfig) {
        let m = &cfg.model;
        self.set("train.model", m.variant);
        self.set("train.gram", m.gram);
        self.set("train.dim", m.dim);
        self.set("train.window", m.window);
        self.set("train.components", m.components);
        self.set("train.negatives", m.negatives);
        self.set("train.combine", m.combine);
        self.set("train.epochs", cfg.epochs);
        self.set("train.lr_start", cfg.lr_start);
        self.set("train.lr_min", cfg.lr_min);
        self.set("train.min_count", cfg.min_count);
        self.set("train.subsample", cfg.subsample);
        self.set("train.ns_power", cfg.ns_power);
        self.set("train.workers", cfg.workers);
        self.set("train.seed", cfg.seed);
    }

    /// Inverse of [`set_train_config`](Self::set_train_config); every key must be present.
    pub fn train_config(&self) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            model: ModelConfig {
                variant: self.field("train.model")?,
                gram: self.field("train.gram")?,
                dim: self.field("train.dim")?,
                window: self.field("train.window")?,
                components: self.field("train.components")?,
                negatives: self.field("train.negatives")?,
                combine: self.field("train.combine")?,
            },
            epochs: self.field("train.epochs")?,
            lr_start: self.field("train.lr_start")?,
            lr_min: self.field("train.lr_min")?,
            min_count: self.field("train.min_count")?,
            subsample: self.field("train.subsample")?,
            ns_power: self.field("train.ns_power")?,
            workers: self.field("train.workers")?,
            seed: self.field("train.seed")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn field<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .get(key)
            .ok_or_else(|| Error::Config(format!("manifest is missing '{key}'")))?;
        raw.parse()
            .map_err(|_| Error::Config(format!("manifest value for '{key}' is invalid: '{raw}'")))
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut m = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected 'key = value'"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::parse(origin, i + 1, "empty key"));
            }
            if m.entries.insert(k.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::parse(origin, i + 1, format!("duplicate key '{k}'")));
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for RunManifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
