use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::nn::{Head, MlpModel};

/// Fraction of samples predicted exactly right.
///
/// Softmax models compare argmax classes with labels; sigmoid models compare the
/// whole thresholded finding vector and therefore need `thresholds`.
pub fn top1_accuracy(model: &MlpModel, set: &LabeledSet, thresholds: Option<&[f64]>) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of an empty set".into()));
    }
    let inputs = set.inputs();
    let correct = match model.head() {
        Head::Softmax => model
            .predict_classes(&inputs)?
            .iter()
            .zip(&set.labels)
            .filter(|(p, l)| p == l)
            .count(),
        Head::SigmoidPerOutput => {
            let thresholds = thresholds
                .ok_or_else(|| Error::InvalidConfig("sigmoid accuracy needs thresholds".into()))?;
            let truth = set
                .findings
                .as_ref()
                .ok_or_else(|| Error::Validation("set has no findings".into()))?;
            model
                .predict_binary(&inputs, thresholds)?
                .iter()
                .zip(truth)
                .filter(|(p, t)| p == t)
                .count()
        }
    };
    Ok(correct as f64 / set.len() as f64)
}

/// Area under the ROC curve via the Mann-Whitney statistic with average ranks:
/// `(wins + ties / 2) / (P N)`.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("auroc labels", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("auroc of NaN scores".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "auroc needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    // Sum of 1-based average ranks of positives, accumulated in halves to stay exact.
    let mut twice_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share (i + j + 2) / 2
        let twice_avg = (i + j + 2) as f64;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        twice_rank_sum += twice_avg * pos_in_tie as f64;
        i = j + 1;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let twice_u = twice_rank_sum - p * (p + 1.0);
    Ok(twice_u / (2.0 * p * n))
}

/// Per-finding AUROC of a sigmoid model, averaged over findings.
pub fn mean_auroc(model: &MlpModel, set: &LabeledSet) -> Result<(f64, Vec<f64>)> {
    let truth = set
        .findings
        .as_ref()
        .ok_or_else(|| Error::Validation("set has no findings".into()))?;
    let probs = model.probabilities(&set.inputs())?;
    let per: Vec<f64> = (0..probs.cols())
        .map(|f| {
            let scores: Vec<f64> = (0..probs.rows()).map(|r| probs.get(r, f)).collect();
            let labels: Vec<u8> = truth.iter().map(|t| t[f]).collect();
            auroc(&scores, &labels)
        })
        .collect::<Result<_>>()?;
    Ok((per.iter().sum::<f64>() / per.len() as f64, per))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub thresholds: Vec<f64>,
    /// True where the validation column had a single class and 0.5 was used.
    pub defaulted: Vec<bool>,
}

/// Youden-optimal threshold for one score column; `None` for single-class labels.
pub(crate) fn youden_threshold(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut candidates = vec![sorted[0] - 1.0];
    candidates.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    candidates.push(sorted[sorted.len() - 1] + 1.0);

    // Walk candidates in ascending order; keep the first maximum.
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    for &t in &candidates {
        let tp = scores.iter().zip(labels).filter(|(&s, &l)| l == 1 && s >= t).count();
        let tn = scores.iter().zip(labels).filter(|(&s, &l)| l == 0 && s < t).count();
        let j = tp as f64 / n_pos as f64 + tn as f64 / n_neg as f64 - 1.0;
        if j > best.0 {
            best = (j, t);
        }
    }
    Some(best.1)
}

/// Per-output thresholds maximising Youden's J on source validation data.
pub fn source_thresholds(model: &MlpModel, validation: &LabeledSet) -> Result<ThresholdFit> {
    if model.head() != Head::SigmoidPerOutput {
        return Err(Error::InvalidConfig("thresholds apply to sigmoid heads only".into()));
    }
    let truth = validation
        .findings
        .as_ref()
        .ok_or_else(|| Error::Validation("validation set has no findings".into()))?;
    let probs = model.probabilities(&validation.inputs())?;
    let mut fit = ThresholdFit {
        thresholds: Vec::new(),
        defaulted: Vec::new(),
    };
    for f in 0..probs.cols() {
        let scores: Vec<f64> = (0..probs.rows()).map(|r| probs.get(r, f)).collect();
        let labels: Vec<u8> = truth.iter().map(|t| t[f]).collect();
        match youden_threshold(&scores, &labels) {
            Some(t) => {
                fit.thresholds.push(t);
                fit.defaulted.push(false);
            }
            None => {
                fit.thresholds.push(0.5);
                fit.defaulted.push(true);
            }
        }
    }
    Ok(fit)
}
