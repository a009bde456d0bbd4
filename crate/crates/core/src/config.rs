//! Run configuration: presets, TOML overlays and the config hash.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::GenerationConfig;
use crate::error::{Error, Result};
use crate::training::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected desk or paper)"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub generation: GenerationConfig,
    pub training: TrainConfig,
    /// Train only on premises with this many variables (length generalisation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_num_vars: Option<usize>,
    /// Test instances per mode drawn for the 2D export.
    pub export_instances: usize,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        match p {
            Preset::Desk => Self {
                seed: 0,
                generation: GenerationConfig::default(),
                training: TrainConfig::default(),
                train_num_vars: None,
                export_instances: 10,
            },
            Preset::Paper => Self {
                seed: 0,
                generation: GenerationConfig::paper(),
                training: TrainConfig::paper(),
                train_num_vars: None,
                export_instances: 10,
            },
        }
    }

    /// The preset with `text` (TOML) overlaid key by key.
    pub fn from_toml(preset: Preset, text: &str) -> Result<Self> {
        let overlay: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut base = toml::Table::try_from(Self::preset(preset)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, overlay);
        let cfg: Self = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(preset: Preset, path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::preset(preset)),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_toml(preset, &text).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    /// Sets the run seed and the training seed together.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.training.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 || self.training.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must be at most {}", i64::MAX)));
        }
        self.generation.validate()?;
        self.training.validate()?;
        if let Some(v) = self.train_num_vars {
            if v < self.generation.min_vars || v > self.generation.max_vars {
                return Err(Error::Config(format!("train_num_vars {v} outside the generated range")));
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(json))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
