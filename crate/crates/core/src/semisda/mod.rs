//! Semi-supervised adaptation of a source model to the target domain.
//!
//! Each step combines a supervised loss on the feedback samples, an
//! unsupervised loss on unlabeled samples (pseudo-labeling or a FixMatch-style
//! weak/strong consistency loss) and, when `batch.k > 0`, the defending loss
//! on samples retrieved from the candidate bank.

mod adapt;
mod augment;
mod batch;
mod binary;
mod step;

pub use adapt::{adapt, adapt_with_observer, AdaptOutcome, BankRecord, EpochRecord, StepEvent};
pub use augment::AugmenterSpec;
pub use batch::{BatchSampler, BatchSpec, MiniBatch};
pub use binary::{adapt_binary, step_binary, BinaryMiniBatch};
pub use step::{step_fixmatch_lite, step_pseudo_label, LossBreakdown};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::SgdConfig;
use crate::rld::RldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    PseudoLabel,
    FixMatchLite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptConfig {
    #[serde(default)]
    pub algorithm: Algorithm,
    /// Weak-view confidence needed for a pseudo-label to count (FixMatch-lite only).
    #[serde(default = "default_threshold")]
    pub confidence_threshold: f64,
    pub epochs: usize,
    pub sgd: SgdConfig,
    pub batch: BatchSpec,
    /// Retrieval settings; used when `batch.k > 0`, and `rld.k` must then equal `batch.k`.
    #[serde(default)]
    pub rld: Option<RldConfig>,
    /// Fixed augmentation; derived from the target training points when absent.
    #[serde(default)]
    pub augment: Option<AugmenterSpec>,
}

fn default_threshold() -> f64 {
    0.95
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::PseudoLabel,
            confidence_threshold: default_threshold(),
            epochs: 30,
            sgd: SgdConfig {
                learning_rate: 0.01,
                momentum: 0.9,
                weight_decay: 0.0,
            },
            batch: BatchSpec::default(),
            rld: None,
            augment: None,
        }
    }
}

impl AdaptConfig {
    /// Baseline configuration with defending retrieval switched on.
    pub fn with_rld(mut self, rld: RldConfig) -> Self {
        self.batch.k = rld.k;
        self.rld = Some(rld);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        self.batch.validate()?;
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::InvalidConfig(format!(
                "confidence_threshold must be in [0, 1], got {}",
                self.confidence_threshold
            )));
        }
        if let Some(a) = &self.augment {
            a.validate()?;
        }
        if let Some(rld) = &self.rld {
            rld.validate()?;
        }
        if self.batch.k > 0 {
            match &self.rld {
                None => {
                    return Err(Error::InvalidConfig(
                        "batch.k > 0 requires an [adapt.rld] section".into(),
                    ))
                }
                Some(r) if r.k != self.batch.k => {
                    return Err(Error::InvalidConfig(format!(
                        "rld.k ({}) must equal batch.k ({})",
                        r.k, self.batch.k
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Retrieval settings when defending samples are in use.
    pub fn active_rld(&self) -> Option<&RldConfig> {
        self.rld.as_ref().filter(|_| self.batch.k > 0)
    }
}
