use serde::{Deserialize, Serialize};

use super::augment::AugmenterSpec;
use super::batch::{BatchSampler, MiniBatch};
use super::step::{step_fixmatch_lite, step_pseudo_label, LossBreakdown};
use super::{AdaptConfig, Algorithm};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::eval::top1_accuracy;
use crate::feedback::TargetSplit;
use crate::nn::{sgd_step, GradientSet, MlpModel, SgdState};
use crate::rld::{generate_bank, CandidateBank, DefendingRetriever};
use crate::rng::substream;
use crate::Point;

/// Bank summary logged with every epoch; empty when retrieval is off.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BankRecord {
    pub sizes: Vec<usize>,
    pub fallbacks: usize,
    #[serde(default)]
    pub pool_sizes: Vec<usize>,
    #[serde(default)]
    pub confidence_quantiles: Vec<Vec<f64>>,
}

impl BankRecord {
    pub(crate) fn from_bank(bank: &CandidateBank) -> Self {
        let stats = bank.stats();
        Self {
            sizes: stats.sizes,
            fallbacks: 0,
            pool_sizes: stats.pool_sizes,
            confidence_quantiles: stats.confidence_quantiles,
        }
    }
}

/// Per-epoch means of the step losses plus the end-of-epoch test metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub l_sup: f64,
    pub l_unsup: f64,
    pub l_rld: f64,
    pub l_total: f64,
    pub mask_rate: f64,
    pub bank: BankRecord,
    pub test_acc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_auroc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AdaptOutcome {
    pub model: MlpModel,
    pub epochs: Vec<EpochRecord>,
}

impl AdaptOutcome {
    pub fn total_fallbacks(&self) -> usize {
        self.epochs.iter().map(|e| e.bank.fallbacks).sum()
    }
}

/// What an observer sees after every optimisation step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    /// 1-based epoch.
    pub epoch: usize,
    /// 0-based step within the epoch.
    pub step: usize,
    pub batch: &'a MiniBatch,
    pub losses: &'a LossBreakdown,
}

/// Running means of the step losses over one epoch.
#[derive(Debug, Default)]
pub(crate) struct EpochAccumulator {
    sum: LossBreakdown,
    steps: usize,
    pub fallbacks: usize,
}

impl EpochAccumulator {
    pub fn add(&mut self, l: &LossBreakdown, fallbacks: usize) {
        self.sum.l_sup += l.l_sup;
        self.sum.l_unsup += l.l_unsup;
        self.sum.l_rld += l.l_rld;
        self.sum.unsup_mask_rate += l.unsup_mask_rate;
        self.steps += 1;
        self.fallbacks += fallbacks;
    }

    pub fn finish(&self, epoch: usize, mut bank: BankRecord) -> EpochRecord {
        let n = self.steps.max(1) as f64;
        let m = LossBreakdown::new(
            self.sum.l_sup / n,
            self.sum.l_unsup / n,
            self.sum.l_rld / n,
            self.sum.unsup_mask_rate / n,
        );
        bank.fallbacks = self.fallbacks;
        EpochRecord {
            epoch,
            l_sup: m.l_sup,
            l_unsup: m.l_unsup,
            l_rld: m.l_rld,
            l_total: m.l_total,
            mask_rate: m.unsup_mask_rate,
            bank,
            test_acc: None,
            test_auroc: None,
        }
    }
}

/// Checks the step result and applies the SGD update, tagging failures with their position.
pub(crate) fn apply_step(
    model: &mut MlpModel,
    losses: &LossBreakdown,
    grads: &GradientSet,
    cfg: &AdaptConfig,
    state: &mut SgdState,
    epoch: usize,
    step: usize,
) -> Result<()> {
    if !losses.is_finite() {
        return Err(Error::NonFinite(format!(
            "non-finite loss at epoch {epoch}, step {step}: {losses:?}"
        )));
    }
    sgd_step(model, grads, &cfg.sgd, state).map_err(|e| match e {
        Error::NonFinite(msg) => Error::NonFinite(format!("epoch {epoch}, step {step}: {msg}")),
        other => other,
    })
}

pub fn adapt(
    model: &MlpModel,
    split: &TargetSplit,
    train: &LabeledSet,
    test: Option<&LabeledSet>,
    cfg: &AdaptConfig,
    seed: u64,
) -> Result<AdaptOutcome> {
    adapt_with_observer(model, split, train, test, cfg, seed, &mut |_| {})
}

/// Adapts a copy of `model` on the labeled/unlabeled partition `split` of `train`.
///
/// Every epoch starts by rebuilding the candidate bank from a snapshot of the
/// current model (when `batch.k > 0`) and then runs
/// [`BatchSpec::steps_per_epoch`](super::BatchSpec::steps_per_epoch) SGD steps.
/// Batch sampling, augmentation and retrieval use separate random streams
/// derived from `seed`, so turning retrieval on leaves the other draws unchanged.
pub fn adapt_with_observer(
    model: &MlpModel,
    split: &TargetSplit,
    train: &LabeledSet,
    test: Option<&LabeledSet>,
    cfg: &AdaptConfig,
    seed: u64,
    observer: &mut dyn FnMut(&StepEvent<'_>),
) -> Result<AdaptOutcome> {
    cfg.validate()?;
    let mut model = model.clone();
    if cfg.epochs == 0 {
        return Ok(AdaptOutcome {
            model,
            epochs: Vec::new(),
        });
    }
    let point = |i: usize| -> Result<Point> {
        train.points.get(i).copied().ok_or_else(|| {
            Error::Validation(format!("split index {i} is outside the {} training samples", train.len()))
        })
    };
    let labeled: Vec<(Point, usize)> = split
        .labeled
        .iter()
        .map(|&(i, c)| Ok((point(i)?, c)))
        .collect::<Result<_>>()?;
    let unlabeled: Vec<Point> = split.unlabeled.iter().map(|&i| point(i)).collect::<Result<_>>()?;
    let augmenter = cfg
        .augment
        .unwrap_or_else(|| AugmenterSpec::for_points(&train.points));

    let mut sampler = BatchSampler::new(cfg.batch, labeled, unlabeled.clone())?;
    let mut batch_rng = substream(seed, "adapt/batch");
    let mut augment_rng = substream(seed, "adapt/augment");
    let mut retrieve_rng = substream(seed, "adapt/retrieve");
    let mut state = SgdState::new(&model);
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let snapshot = model.clone();
        let bank = match cfg.active_rld() {
            Some(rld) => Some(generate_bank(&snapshot, &unlabeled, &split.unlabeled, rld.p, epoch)?),
            None => None,
        };
        let retriever = match (&bank, cfg.active_rld()) {
            (Some(bank), Some(rld)) => Some(DefendingRetriever::new(
                bank,
                rld,
                cfg.batch.k,
                Some(&snapshot),
                &mut retrieve_rng,
            )?),
            _ => None,
        };

        let mut acc = EpochAccumulator::default();
        for step in 0..sampler.steps_per_epoch() {
            let batch = sampler.next_batch(retriever.as_ref(), epoch, &mut batch_rng, &mut retrieve_rng)?;
            let (losses, grads) = match cfg.algorithm {
                Algorithm::PseudoLabel => step_pseudo_label(&model, &batch)?,
                Algorithm::FixMatchLite => step_fixmatch_lite(
                    &model,
                    &batch,
                    cfg.confidence_threshold,
                    &augmenter,
                    &mut augment_rng,
                )?,
            };
            apply_step(&mut model, &losses, &grads, cfg, &mut state, epoch, step)?;
            acc.add(&losses, batch.fallbacks);
            observer(&StepEvent {
                epoch,
                step,
                batch: &batch,
                losses: &losses,
            });
        }
        let bank_record = bank.as_ref().map(BankRecord::from_bank).unwrap_or_default();
        let mut record = acc.finish(epoch, bank_record);
        if let Some(test) = test {
            record.test_acc = Some(top1_accuracy(&model, test, None)?);
        }
        records.push(record);
    }
    Ok(AdaptOutcome {
        model,
        epochs: records,
    })
}
