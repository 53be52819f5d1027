//! Simulated user feedback: which target training samples get a ground-truth label.
//!
//! Users tend to report what the deployed model got wrong. The policies here
//! reproduce that bias (and its opposites) so its effect on adaptation can be
//! measured against random feedback.

mod binary;
pub(crate) mod select;

pub use binary::{simulate_feedback_binary, BinarySplit, FindingSplit};
pub use select::{simulate_feedback, simulate_feedback_nbf_ce};

use serde::{Deserialize, Serialize};

pub use crate::error::Shortage;

/// How labeled target samples are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackPolicy {
    /// Uniform per class.
    #[serde(rename = "rf")]
    Random,
    /// Uniform among the source model's mistakes, per true class.
    #[serde(rename = "nbf")]
    NegativelyBiased,
    /// Uniform among the source model's correct predictions, per true class.
    #[serde(rename = "pbf")]
    PositivelyBiased,
    /// `positive` correct plus `negative` incorrect samples per class.
    Mixed { positive: usize, negative: usize },
    /// The most confidently wrong predictions.
    #[serde(rename = "nbf_ce")]
    ConfidentErrors,
    /// Highest predictive entropy per true class.
    Entropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShortageFallback {
    #[default]
    Error,
    /// Top up from the complementary pool (correct predictions for NBF,
    /// incorrect ones for PBF) and record the shortage.
    FillFromCorrect,
}

/// Per-finding quantities of false-positive and false-negative feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinaryCounts {
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSpec {
    pub policy: FeedbackPolicy,
    pub per_class_count: usize,
    #[serde(default)]
    pub binary_counts: Option<BinaryCounts>,
    #[serde(default)]
    pub fallback: ShortageFallback,
}

impl FeedbackSpec {
    pub fn new(policy: FeedbackPolicy, per_class_count: usize) -> Self {
        Self {
            policy,
            per_class_count,
            binary_counts: None,
            fallback: ShortageFallback::Error,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if let Some(c) = self.binary_counts {
            if c.fp + c.fn_ == 0 {
                return Err(Error::InvalidConfig("binary feedback counts must not both be 0".into()));
            }
            return Ok(());
        }
        if self.per_class_count == 0 {
            return Err(Error::InvalidConfig("per_class_count must be > 0".into()));
        }
        if let FeedbackPolicy::Mixed { positive, negative } = self.policy {
            if positive + negative != self.per_class_count {
                return Err(Error::InvalidConfig(format!(
                    "mixed feedback {positive}:{negative} must add up to per_class_count {}",
                    self.per_class_count
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: FeedbackSpec,
    pub seed: u64,
    #[serde(default)]
    pub shortages: Vec<Shortage>,
}

/// Partition of the target training indices into labeled feedback and unlabeled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSplit {
    /// `(training index, ground-truth class)`, in selection order.
    pub labeled: Vec<(usize, usize)>,
    /// Remaining training indices, ascending.
    pub unlabeled: Vec<usize>,
    pub provenance: Provenance,
}

impl TargetSplit {
    pub fn labeled_indices(&self) -> Vec<usize> {
        self.labeled.iter().map(|&(i, _)| i).collect()
    }

    pub fn labeled_counts(&self, num_classes: usize) -> Vec<usize> {
        let mut counts = vec![0; num_classes];
        self.labeled.iter().for_each(|&(_, c)| counts[c] += 1);
        counts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("split serializes")
    }

    pub fn from_json(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
