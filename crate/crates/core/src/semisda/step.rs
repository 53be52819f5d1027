use rand::Rng;
use serde::{Deserialize, Serialize};

use super::augment::AugmenterSpec;
use super::batch::MiniBatch;
use crate::error::Result;
use crate::nn::{loss_ce, GradientSet, Matrix, MlpModel};
use crate::rld::{rld_loss, DefendingPair};
use crate::Point;

/// Loss terms of one step. `l_total` is exactly `l_sup + l_unsup + l_rld`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_sup: f64,
    pub l_unsup: f64,
    pub l_rld: f64,
    pub l_total: f64,
    /// Fraction of unlabeled samples that contributed to `l_unsup`.
    pub unsup_mask_rate: f64,
}

impl LossBreakdown {
    pub(crate) fn new(l_sup: f64, l_unsup: f64, l_rld: f64, unsup_mask_rate: f64) -> Self {
        Self {
            l_sup,
            l_unsup,
            l_rld,
            l_total: l_sup + l_unsup + l_rld,
            unsup_mask_rate,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.l_sup.is_finite() && self.l_unsup.is_finite() && self.l_rld.is_finite()
    }
}

fn supervised(model: &MlpModel, points: &[Point], labels: &[usize]) -> Result<(f64, GradientSet)> {
    let trace = model.forward(&Matrix::from_points(points))?;
    let lg = loss_ce(trace.probabilities(), labels, None)?;
    Ok((lg.loss, model.backward(&trace, &lg.grad)?))
}

fn split_labeled(batch: &MiniBatch) -> (Vec<Point>, Vec<usize>) {
    batch.labeled.iter().copied().unzip()
}

/// Pseudo-labeling step: unlabeled samples are trained towards the argmax of
/// the current model, with the targets treated as constants.
pub fn step_pseudo_label(model: &MlpModel, batch: &MiniBatch) -> Result<(LossBreakdown, GradientSet)> {
    pseudo_label_terms(model, model, batch)
}

/// [`step_pseudo_label`] with pseudo-labels taken from `target_model`.
pub(crate) fn pseudo_label_terms(
    model: &MlpModel,
    target_model: &MlpModel,
    batch: &MiniBatch,
) -> Result<(LossBreakdown, GradientSet)> {
    let (points, labels) = split_labeled(batch);
    let (l_sup, mut grads) = supervised(model, &points, &labels)?;

    let mut l_unsup = 0.0;
    let mut mask_rate = 0.0;
    if !batch.unlabeled.is_empty() {
        let inputs = Matrix::from_points(&batch.unlabeled);
        let targets = target_model.predict_classes(&inputs)?;
        let trace = model.forward(&inputs)?;
        let lg = loss_ce(trace.probabilities(), &targets, None)?;
        l_unsup = lg.loss;
        mask_rate = 1.0;
        grads.add_assign(&model.backward(&trace, &lg.grad)?);
    }

    let l_rld = add_rld(model, &batch.defending, &mut grads)?;
    Ok((LossBreakdown::new(l_sup, l_unsup, l_rld, mask_rate), grads))
}

fn add_rld(model: &MlpModel, pairs: &[DefendingPair], grads: &mut GradientSet) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let (loss, g) = rld_loss(model, pairs)?;
    grads.add_assign(&g);
    Ok(loss)
}

/// Consistency step: pseudo-labels come from a weak view and are applied to a
/// strong view when the weak-view confidence reaches `threshold`.
///
/// `l_unsup` is averaged over all unlabeled samples, masked ones counting as 0.
/// Labeled and defending samples are weakly augmented.
pub fn step_fixmatch_lite<R: Rng + ?Sized>(
    model: &MlpModel,
    batch: &MiniBatch,
    threshold: f64,
    augmenter: &AugmenterSpec,
    rng: &mut R,
) -> Result<(LossBreakdown, GradientSet)> {
    let (points, labels) = split_labeled(batch);
    let weak_labeled = augmenter.augment_weak(&points, rng);
    let (l_sup, mut grads) = supervised(model, &weak_labeled, &labels)?;

    let mut l_unsup = 0.0;
    let mut mask_rate = 0.0;
    if !batch.unlabeled.is_empty() {
        let weak = augmenter.augment_weak(&batch.unlabeled, rng);
        let strong = augmenter.augment_strong(&batch.unlabeled, rng);
        let weak_probs = model.probabilities(&Matrix::from_points(&weak))?;
        let (targets, mask) = confident_targets(&weak_probs, threshold);
        let passing: f64 = mask.iter().sum();
        let n = batch.unlabeled.len() as f64;
        mask_rate = passing / n;
        if passing > 0.0 {
            let trace = model.forward(&Matrix::from_points(&strong))?;
            let mut lg = loss_ce(trace.probabilities(), &targets, Some(&mask))?;
            lg.rescale(passing / n);
            l_unsup = lg.loss;
            grads.add_assign(&model.backward(&trace, &lg.grad)?);
        }
    }

    let defending: Vec<DefendingPair> = if batch.defending.is_empty() {
        Vec::new()
    } else {
        let pts: Vec<Point> = batch.defending.iter().map(|d| d.point).collect();
        augmenter
            .augment_weak(&pts, rng)
            .into_iter()
            .zip(&batch.defending)
            .map(|(point, d)| DefendingPair { point, ..*d })
            .collect()
    };
    let l_rld = add_rld(model, &defending, &mut grads)?;
    Ok((LossBreakdown::new(l_sup, l_unsup, l_rld, mask_rate), grads))
}

/// Argmax targets and a 0/1 mask of rows whose top probability reaches `threshold`.
pub(crate) fn confident_targets(probs: &Matrix, threshold: f64) -> (Vec<usize>, Vec<f64>) {
    probs
        .iter_rows()
        .map(|row| {
            let c = crate::nn::argmax(row);
            (c, if row[c] >= threshold { 1.0 } else { 0.0 })
        })
        .unzip()
}
