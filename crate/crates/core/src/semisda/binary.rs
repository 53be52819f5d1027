//! Adaptation of multi-output sigmoid models from per-finding feedback.
//!
//! Losses are masked binary cross-entropies. Pseudo-labels threshold the model
//! outputs at the source-calibrated thresholds, and the candidate bank holds
//! one group per (finding, value) so each defending sample carries a single
//! finding target.

use rand::Rng;

use super::adapt::{apply_step, AdaptOutcome, BankRecord, EpochAccumulator};
use super::augment::AugmenterSpec;
use super::batch::CyclingSampler;
use super::step::LossBreakdown;
use super::{AdaptConfig, Algorithm};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::eval::{mean_auroc, top1_accuracy};
use crate::feedback::BinarySplit;
use crate::nn::{loss_bce_masked, GradientSet, Matrix, MlpModel, SgdState};
use crate::rld::{finding_group, generate_finding_bank, DefendingPair, DefendingRetriever};
use crate::rng::substream;
use crate::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMiniBatch {
    /// Point and per-finding feedback (`None` where the finding is unlabeled).
    pub labeled: Vec<(Point, Vec<Option<u8>>)>,
    pub unlabeled: Vec<Point>,
    /// Labels are bank groups `2 * finding + value`.
    pub defending: Vec<DefendingPair>,
    pub fallbacks: usize,
}

fn bce_term(
    model: &MlpModel,
    points: &[Point],
    targets: &Matrix,
    mask: &Matrix,
    grads: &mut GradientSet,
    scale: f64,
) -> Result<f64> {
    let trace = model.forward(&Matrix::from_points(points))?;
    let mut lg = loss_bce_masked(trace.probabilities(), targets, Some(mask))?;
    if lg.is_empty() {
        return Ok(0.0);
    }
    lg.rescale(scale);
    grads.add_assign(&model.backward(&trace, &lg.grad)?);
    Ok(lg.loss)
}

/// One binary-mode step. With FixMatch-lite an unlabeled output counts when
/// its weak-view probability of the pseudo value reaches `cfg.confidence_threshold`;
/// `l_unsup` is averaged over all unlabeled outputs.
pub fn step_binary<R: Rng + ?Sized>(
    model: &MlpModel,
    batch: &BinaryMiniBatch,
    thresholds: &[f64],
    cfg: &AdaptConfig,
    augmenter: &AugmenterSpec,
    rng: &mut R,
) -> Result<(LossBreakdown, GradientSet)> {
    let f = model.output_dim();
    let fixmatch = cfg.algorithm == Algorithm::FixMatchLite;
    let mut grads = GradientSet::zeros_like(model);

    let raw: Vec<Point> = batch.labeled.iter().map(|l| l.0).collect();
    let points = if fixmatch { augmenter.augment_weak(&raw, rng) } else { raw };
    let mut targets = Matrix::zeros(points.len(), f);
    let mut mask = Matrix::zeros(points.len(), f);
    for (r, (_, values)) in batch.labeled.iter().enumerate() {
        for (c, v) in values.iter().enumerate() {
            if let Some(v) = v {
                targets.set(r, c, f64::from(*v));
                mask.set(r, c, 1.0);
            }
        }
    }
    let l_sup = bce_term(model, &points, &targets, &mask, &mut grads, 1.0)?;

    let (mut l_unsup, mut mask_rate) = (0.0, 0.0);
    if !batch.unlabeled.is_empty() {
        let (view_t, view_l) = if fixmatch {
            let weak = augmenter.augment_weak(&batch.unlabeled, rng);
            (weak, augmenter.augment_strong(&batch.unlabeled, rng))
        } else {
            (batch.unlabeled.clone(), batch.unlabeled.clone())
        };
        let probs = model.probabilities(&Matrix::from_points(&view_t))?;
        let mut targets = Matrix::zeros(probs.rows(), f);
        let mut mask = Matrix::zeros(probs.rows(), f);
        for r in 0..probs.rows() {
            for c in 0..f {
                let p = probs.get(r, c);
                let positive = p >= thresholds[c];
                let confidence = if positive { p } else { 1.0 - p };
                targets.set(r, c, f64::from(u8::from(positive)));
                if !fixmatch || confidence >= cfg.confidence_threshold {
                    mask.set(r, c, 1.0);
                }
            }
        }
        let passing: f64 = mask.data().iter().sum();
        let total = mask.data().len() as f64;
        mask_rate = passing / total;
        if passing > 0.0 {
            l_unsup = bce_term(model, &view_l, &targets, &mask, &mut grads, passing / total)?;
        }
    }

    let mut l_rld = 0.0;
    if !batch.defending.is_empty() {
        let raw: Vec<Point> = batch.defending.iter().map(|d| d.point).collect();
        let points = if fixmatch { augmenter.augment_weak(&raw, rng) } else { raw };
        let mut targets = Matrix::zeros(points.len(), f);
        let mut mask = Matrix::zeros(points.len(), f);
        for (r, d) in batch.defending.iter().enumerate() {
            targets.set(r, d.label / 2, (d.label % 2) as f64);
            mask.set(r, d.label / 2, 1.0);
        }
        l_rld = bce_term(model, &points, &targets, &mask, &mut grads, 1.0)?;
    }
    Ok((LossBreakdown::new(l_sup, l_unsup, l_rld, mask_rate), grads))
}

/// Binary-mode counterpart of [`adapt`](super::adapt).
///
/// Every sample with feedback on at least one finding joins the labeled pool;
/// all other training samples are unlabeled. Each of the `k` defending draws
/// of a labeled sample targets one of its labeled findings in turn.
pub fn adapt_binary(
    model: &MlpModel,
    split: &BinarySplit,
    train: &LabeledSet,
    test: Option<&LabeledSet>,
    thresholds: &[f64],
    cfg: &AdaptConfig,
    seed: u64,
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let f = model.output_dim();
    if split.findings.len() != f || thresholds.len() != f {
        return Err(Error::shape("binary split findings", f, split.findings.len().min(thresholds.len())));
    }
    let mut model = model.clone();
    if cfg.epochs == 0 {
        return Ok(AdaptOutcome {
            model,
            epochs: Vec::new(),
        });
    }
    let mut feedback: Vec<Vec<Option<u8>>> = vec![vec![None; f]; train.len()];
    for (finding, fs) in split.findings.iter().enumerate() {
        for &(i, v) in &fs.labeled {
            let slot = feedback
                .get_mut(i)
                .ok_or_else(|| Error::Validation(format!("split index {i} is outside the training set")))?;
            slot[finding] = Some(v);
        }
    }
    let labeled_idx: Vec<usize> = (0..train.len()).filter(|&i| feedback[i].iter().any(Option::is_some)).collect();
    let unlabeled_idx: Vec<usize> = (0..train.len()).filter(|&i| feedback[i].iter().all(Option::is_none)).collect();
    if labeled_idx.is_empty() {
        return Err(Error::Validation("no labeled feedback to adapt with".into()));
    }
    if cfg.batch.mu > 0 && unlabeled_idx.is_empty() {
        return Err(Error::Validation("unlabeled pool is empty but mu > 0".into()));
    }
    let unlabeled_points: Vec<Point> = unlabeled_idx.iter().map(|&i| train.points[i]).collect();
    let augmenter = cfg
        .augment
        .unwrap_or_else(|| AugmenterSpec::for_points(&train.points));
    let spec = cfg.batch;
    let steps = spec.steps_per_epoch(labeled_idx.len(), unlabeled_idx.len());

    let mut labeled_cycle = CyclingSampler::new(labeled_idx);
    let mut unlabeled_cycle = CyclingSampler::new(unlabeled_idx.clone());
    let mut batch_rng = substream(seed, "adapt/batch");
    let mut augment_rng = substream(seed, "adapt/augment");
    let mut retrieve_rng = substream(seed, "adapt/retrieve");
    let mut state = SgdState::new(&model);
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let snapshot = model.clone();
        let bank = match cfg.active_rld() {
            Some(rld) => Some(generate_finding_bank(
                &snapshot,
                &unlabeled_points,
                &unlabeled_idx,
                thresholds,
                rld.p,
                epoch,
            )?),
            None => None,
        };
        let retriever = match (&bank, cfg.active_rld()) {
            (Some(bank), Some(rld)) => Some(DefendingRetriever::new(bank, rld, 1, Some(&snapshot), &mut retrieve_rng)?),
            _ => None,
        };
        let mut acc = EpochAccumulator::default();
        for step in 0..steps {
            let labeled: Vec<(Point, Vec<Option<u8>>)> = labeled_cycle
                .take(spec.labeled, &mut batch_rng)
                .into_iter()
                .map(|i| (train.points[i], feedback[i].clone()))
                .collect();
            let unlabeled: Vec<Point> = unlabeled_cycle
                .take(spec.unlabeled(), &mut batch_rng)
                .into_iter()
                .map(|i| train.points[i])
                .collect();
            let (defending, fallbacks) = match &retriever {
                Some(r) => {
                    let anchors: Vec<(Point, usize)> = labeled
                        .iter()
                        .flat_map(|(x, values)| {
                            let groups: Vec<usize> = values
                                .iter()
                                .enumerate()
                                .filter_map(|(c, v)| v.map(|v| finding_group(c, v)))
                                .collect();
                            (0..spec.k).map(move |j| (*x, groups[j % groups.len()]))
                        })
                        .collect();
                    let out = r.retrieve(&anchors, epoch, &mut retrieve_rng)?;
                    (out.pairs, out.fallbacks)
                }
                None => (Vec::new(), 0),
            };
            let batch = BinaryMiniBatch {
                labeled,
                unlabeled,
                defending,
                fallbacks,
            };
            let (losses, grads) = step_binary(&model, &batch, thresholds, cfg, &augmenter, &mut augment_rng)?;
            apply_step(&mut model, &losses, &grads, cfg, &mut state, epoch, step)?;
            acc.add(&losses, batch.fallbacks);
        }
        let bank_record = bank.as_ref().map(BankRecord::from_bank).unwrap_or_default();
        let mut record = acc.finish(epoch, bank_record);
        if let Some(test) = test {
            record.test_acc = Some(top1_accuracy(&model, test, Some(thresholds))?);
            record.test_auroc = Some(mean_auroc(&model, test)?.0);
        }
        records.push(record);
    }
    Ok(AdaptOutcome {
        model,
        epochs: records,
    })
}
