//! Experiment configuration: a TOML document plus `key.path=value` overrides.
//!
//! ```toml
//! seeds = [0, 1, 2]
//! output_dir = "out/blobs"
//!
//! [dataset]
//! kind = "blobs"          # or "moons"
//! train_ratio = 0.8
//! [dataset.blobs]         # optional, every field defaults
//! std = 0.8
//!
//! [pretrain]
//! hidden = [32, 32]
//!
//! [feedback]
//! policy = "nbf"
//! per_class_count = 5
//!
//! [adapt]
//! epochs = 30
//! batch = { labeled = 16, mu = 7, k = 3 }
//! rld = { p = 0.4, k = 3 }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pretrain::PretrainConfig;
use crate::data::{BlobsSpec, MoonsSpec};
use crate::error::{Error, Result};
use crate::feedback::{FeedbackPolicy, FeedbackSpec, ShortageFallback};
use crate::nn::{Head, SgdConfig};
use crate::rld::RldConfig;
use crate::semisda::{AdaptConfig, BatchSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    #[default]
    Blobs,
    Moons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub kind: DatasetKind,
    /// Fraction of each domain used for training; the rest is the test split.
    pub train_ratio: f64,
    pub blobs: BlobsSpec,
    pub moons: MoonsSpec,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            kind: DatasetKind::Blobs,
            train_ratio: 0.8,
            blobs: BlobsSpec::default(),
            moons: MoonsSpec::default(),
        }
    }
}

impl DatasetConfig {
    /// Binary mode: blobs with findings, trained with a sigmoid head.
    pub fn is_binary(&self) -> bool {
        self.kind == DatasetKind::Blobs && self.blobs.findings.is_some()
    }

    pub fn head(&self) -> Head {
        if self.is_binary() {
            Head::SigmoidPerOutput
        } else {
            Head::Softmax
        }
    }
}

/// Streaming adaptation with a bounded FIFO memory of unlabeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamConfig {
    pub memory_cap: usize,
    /// Fractions of the stream after which adaptation runs; strictly increasing in (0, 1].
    pub checkpoints: Vec<f64>,
    /// Continue from the previous checkpoint's model instead of the source model.
    pub warm_start: bool,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self {
            memory_cap: 5000,
            checkpoints: vec![0.1, 0.4, 0.7, 1.0],
            warm_start: false,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self, batch: &BatchSpec) -> Result<()> {
        if self.memory_cap < batch.unlabeled().max(1) {
            return Err(Error::InvalidConfig(format!(
                "stream.memory_cap ({}) must be at least mu * B = {}",
                self.memory_cap,
                batch.unlabeled()
            )));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::InvalidConfig("stream.checkpoints must not be empty".into()));
        }
        let in_range = self.checkpoints.iter().all(|&f| f > 0.0 && f <= 1.0);
        let increasing = self.checkpoints.windows(2).all(|w| w[0] < w[1]);
        if !(in_range && increasing) {
            return Err(Error::InvalidConfig(format!(
                "stream.checkpoints must be strictly increasing in (0, 1], got {:?}",
                self.checkpoints
            )));
        }
        Ok(())
    }
}

/// One sweep axis. Either `key` + `values` (one override per cell) or
/// explicit `cells`, each with a label and several overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    #[serde(default)]
    pub key: Option<String>,
    #[serde(default)]
    pub values: Vec<toml::Value>,
    #[serde(default)]
    pub cells: Vec<CellConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub label: String,
    pub set: BTreeMap<String, toml::Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub pretrain: PretrainConfig,
    #[serde(default = "default_feedback")]
    pub feedback: FeedbackSpec,
    #[serde(default = "default_adapt")]
    pub adapt: AdaptConfig,
    #[serde(default)]
    pub stream: StreamConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_feedback() -> FeedbackSpec {
    FeedbackSpec {
        policy: FeedbackPolicy::NegativelyBiased,
        per_class_count: 5,
        binary_counts: None,
        fallback: ShortageFallback::FillFromCorrect,
    }
}

fn default_adapt() -> AdaptConfig {
    AdaptConfig {
        epochs: 30,
        sgd: SgdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            weight_decay: 0.0,
        },
        batch: BatchSpec {
            labeled: 16,
            mu: 7,
            k: 3,
        },
        rld: Some(RldConfig::default()),
        ..AdaptConfig::default()
    }
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            pretrain: PretrainConfig::default(),
            feedback: default_feedback(),
            adapt: default_adapt(),
            stream: StreamConfig::default(),
            sweep: SweepConfig::default(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self.dataset.kind {
            DatasetKind::Blobs => self.dataset.blobs.validate()?,
            DatasetKind::Moons => self.dataset.moons.validate()?,
        }
        if !(self.dataset.train_ratio > 0.0 && self.dataset.train_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "dataset.train_ratio must be in (0, 1), got {}",
                self.dataset.train_ratio
            )));
        }
        self.pretrain.validate()?;
        self.feedback.validate()?;
        if self.dataset.is_binary() != self.feedback.binary_counts.is_some() {
            return Err(Error::InvalidConfig(
                "feedback.binary_counts must be set exactly when dataset.blobs.findings is".into(),
            ));
        }
        self.adapt.validate()?;
        self.stream.validate(&self.adapt.batch)?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidConfig("seeds must not be empty".into()));
        }
        Ok(())
    }

    /// Parses `text`, fills in defaults, then applies `key.path=value` overrides.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let user: toml::Table =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        let mut table = Self::default().to_table();
        merge(&mut table, user);
        for o in overrides {
            let (key, value) = o.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("override `{o}` must look like key.path=value"))
            })?;
            set_path(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        Self::from_table(table)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, overrides)
    }

    fn deserialize_table(table: toml::Table) -> Result<Self> {
        table
            .try_into()
            .map_err(|e: toml::de::Error| Error::InvalidConfig(format!("config: {}", e.message())))
    }

    pub(crate) fn from_table(table: toml::Table) -> Result<Self> {
        let cfg = Self::deserialize_table(table)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config converts to a TOML table")
    }

    /// Returns a copy with `overrides` applied, re-validated.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, toml::Value>) -> Result<Self> {
        let mut table = self.to_table();
        for (k, v) in overrides {
            set_path(&mut table, k, v.clone())?;
        }
        Self::from_table(table)
    }

    /// SHA-256 of the canonical (key-sorted) JSON form, ignoring seeds, the
    /// output directory and sweep declarations.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("seeds");
            map.remove("output_dir");
            map.remove("sweep");
        }
        let canonical = serde_json::to_string(&value).expect("value serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Recursively overlays `user` onto `base`; non-table values replace wholesale.
fn merge(base: &mut toml::Table, user: toml::Table) {
    for (key, value) in user {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) => merge(b, u),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// Parses an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::InvalidConfig(format!("malformed override key `{key}`")));
    }
    let mut cur = table;
    for part in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("override `{key}`: `{part}` is not a table"))
        })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
