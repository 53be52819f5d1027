use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::select::desc_then_index;
use super::{FeedbackPolicy, FeedbackSpec, Provenance, Shortage, ShortageFallback};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::rng::substream;

/// Labeled feedback for one finding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingSplit {
    /// `(training index, ground-truth finding value)`.
    pub labeled: Vec<(usize, u8)>,
    pub unlabeled: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySplit {
    pub findings: Vec<FindingSplit>,
    pub provenance: Provenance,
}

/// Confusion-matrix cells of one finding, as ascending index lists.
pub(crate) struct Confusion {
    pub tp: Vec<usize>,
    pub tn: Vec<usize>,
    pub fp: Vec<usize>,
    pub fn_: Vec<usize>,
}

pub(crate) fn confusion(truth: &[Vec<u8>], predicted: &[Vec<u8>], finding: usize) -> Confusion {
    let mut c = Confusion {
        tp: Vec::new(),
        tn: Vec::new(),
        fp: Vec::new(),
        fn_: Vec::new(),
    };
    for (i, (t, p)) in truth.iter().zip(predicted).enumerate() {
        match (t[finding], p[finding]) {
            (1, 1) => c.tp.push(i),
            (0, 0) => c.tn.push(i),
            (0, _) => c.fp.push(i),
            _ => c.fn_.push(i),
        }
    }
    c
}

/// Per finding, `fp` samples from the false positives and `fn` from the false
/// negatives of the thresholded source model.
///
/// `NegativelyBiased` draws uniformly inside each error pool, `ConfidentErrors`
/// takes the largest `|p - threshold|` first. `Random` and `PositivelyBiased`
/// draw from all negatives/positives and from the correct predictions respectively.
pub fn simulate_feedback_binary(
    train: &LabeledSet,
    source_model: &MlpModel,
    thresholds: &[f64],
    spec: &FeedbackSpec,
    seed: u64,
) -> Result<BinarySplit> {
    spec.validate()?;
    let counts = spec
        .binary_counts
        .ok_or_else(|| Error::InvalidConfig("binary feedback needs binary_counts (fp, fn)".into()))?;
    let truth = train
        .findings
        .as_ref()
        .ok_or_else(|| Error::Validation("training set has no findings".into()))?;
    let inputs = train.inputs();
    let predicted = source_model.predict_binary(&inputs, thresholds)?;
    let margin = source_model.threshold_margin(&inputs, thresholds)?;
    if predicted.first().map(Vec::len) != Some(train.num_findings()) {
        return Err(Error::shape(
            "binary feedback model outputs",
            train.num_findings(),
            source_model.output_dim(),
        ));
    }

    let mut rng = substream(seed, "feedback/binary");
    let mut shortages = Vec::new();
    let mut findings = Vec::new();
    for f in 0..train.num_findings() {
        let cm = confusion(truth, &predicted, f);
        let negatives: Vec<usize> = cm.tn.iter().chain(&cm.fp).copied().collect();
        let positives: Vec<usize> = cm.tp.iter().chain(&cm.fn_).copied().collect();
        // (pool for truth 0, complement), (pool for truth 1, complement)
        let (mut neg_pool, mut neg_alt, mut pos_pool, mut pos_alt) = match spec.policy {
            FeedbackPolicy::NegativelyBiased | FeedbackPolicy::ConfidentErrors => {
                (cm.fp, cm.tn, cm.fn_, cm.tp)
            }
            FeedbackPolicy::PositivelyBiased => (cm.tn, cm.fp, cm.tp, cm.fn_),
            FeedbackPolicy::Random => (negatives, Vec::new(), positives, Vec::new()),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "policy {other:?} is not available in binary mode"
                )))
            }
        };
        for pool in [&mut neg_pool, &mut neg_alt, &mut pos_pool, &mut pos_alt] {
            if spec.policy == FeedbackPolicy::ConfidentErrors {
                pool.sort_by(|&x, &y| desc_then_index(margin.get(x, f), margin.get(y, f), x, y));
            } else {
                pool.shuffle(&mut rng);
            }
        }
        let mut labeled = Vec::new();
        for (pool, alt, want, value, name) in [
            (&neg_pool, &neg_alt, counts.fp, 0u8, "fp"),
            (&pos_pool, &pos_alt, counts.fn_, 1u8, "fn"),
        ] {
            let have = pool.len().min(want);
            labeled.extend(pool[..have].iter().map(|&i| (i, value)));
            if have < want {
                shortages.push(Shortage {
                    group: format!("finding {f} {name}"),
                    requested: want,
                    available: have,
                });
                if spec.fallback == ShortageFallback::FillFromCorrect {
                    labeled.extend(alt.iter().take(want - have).map(|&i| (i, value)));
                }
            }
        }
        let mut is_labeled = vec![false; train.len()];
        labeled.iter().for_each(|&(i, _)| is_labeled[i] = true);
        findings.push(FindingSplit {
            labeled,
            unlabeled: (0..train.len()).filter(|&i| !is_labeled[i]).collect(),
        });
    }
    if !shortages.is_empty() && spec.fallback == ShortageFallback::Error {
        return Err(Error::Shortage(shortages));
    }
    Ok(BinarySplit {
        findings,
        provenance: Provenance {
            spec: spec.clone(),
            seed,
            shortages,
        },
    })
}
