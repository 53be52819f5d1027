//! Retrieval of latent defending samples.
//!
//! Before every epoch the frozen model pseudo-labels the unlabeled pool and the
//! most confident fraction `p` of each class is kept in a [`CandidateBank`].
//! During the epoch every labeled sample `(x, y)` brings `k` bank samples
//! pseudo-labeled `y` into the mini-batch, and their cross-entropy is added to
//! the loss with its own `1 / (k B)` normalizer. A labeled set that clusters in
//! one corner of a class therefore no longer dominates the supervised signal.

mod bank;
mod kmeans;
mod retrieve;

pub use bank::{finding_group, generate_bank, generate_finding_bank, BankEntry, BankStats, CandidateBank};
pub use kmeans::{kmeans, KMeansResult};
pub use retrieve::{retrieve_defending, rld_loss, DefendingPair, DefendingRetriever, Retrieval};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform draws from the bank entries of the labeled sample's class.
    #[default]
    ClassAwareRandom,
    /// Uniform draws from the whole bank; each entry keeps its own pseudo label.
    UnconditionedRandom,
    /// Entries nearest to k-means centroids of the class's bank points.
    KMeansCenter,
    /// Class entries whose penultimate features are farthest (cosine) from the labeled sample's.
    CosineDistant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyClassFallback {
    /// Use `k` copies of the labeled sample itself.
    #[default]
    DuplicateLabeled,
    /// Emit nothing for this labeled sample.
    SkipWithFlag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RldConfig {
    /// Fraction of each pseudo-class kept in the bank, in `(0, 1]`.
    pub p: f64,
    /// Defending samples per labeled sample.
    pub k: usize,
    pub strategy: Strategy,
    /// Centroid count for [`Strategy::KMeansCenter`]; defaults to `k`.
    pub kmeans_clusters: Option<usize>,
    pub empty_class_fallback: EmptyClassFallback,
}

impl Default for RldConfig {
    fn default() -> Self {
        Self {
            p: 0.4,
            k: 3,
            strategy: Strategy::ClassAwareRandom,
            kmeans_clusters: None,
            empty_class_fallback: EmptyClassFallback::DuplicateLabeled,
        }
    }
}

/// Lloyd iterations used by [`Strategy::KMeansCenter`].
pub const KMEANS_ITERATIONS: usize = 20;

impl RldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidConfig(format!("rld.p must be in (0, 1], got {}", self.p)));
        }
        if self.k == 0 {
            return Err(Error::InvalidConfig("rld.k must be >= 1".into()));
        }
        if self.kmeans_clusters == Some(0) {
            return Err(Error::InvalidConfig("rld.kmeans_clusters must be >= 1".into()));
        }
        Ok(())
    }

    pub fn clusters(&self) -> usize {
        self.kmeans_clusters.unwrap_or(self.k)
    }
}

#[cfg(test)]
mod tests;
