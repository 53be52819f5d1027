use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{DatasetConfig, DatasetKind, ExperimentConfig};
use super::pretrain::pretrain;
use crate::data::{make_blobs_pair, make_moons_pair, split_train_test, LabeledSet};
use crate::error::{Error, Result};
use crate::eval::{mean_auroc, source_thresholds, top1_accuracy, ThresholdFit};
use crate::feedback::{simulate_feedback, simulate_feedback_binary, BinarySplit, Shortage, TargetSplit};
use crate::nn::{Head, MlpModel};
use crate::rng::derive_seed;
use crate::semisda::{adapt, adapt_binary, AdaptConfig, AdaptOutcome, EpochRecord};

/// Source and target domains, each split into train and test.
#[derive(Debug, Clone)]
pub struct Domains {
    pub source_train: LabeledSet,
    pub source_test: LabeledSet,
    pub target_train: LabeledSet,
    pub target_test: LabeledSet,
}

pub fn generate_domains(dataset: &DatasetConfig, seed: u64) -> Result<Domains> {
    let (source, target) = match dataset.kind {
        DatasetKind::Blobs => make_blobs_pair(&dataset.blobs, seed)?,
        DatasetKind::Moons => make_moons_pair(&dataset.moons, seed)?,
    };
    let ((source_train, _), (source_test, _)) =
        split_train_test(&source, dataset.train_ratio, derive_seed(seed, "source-split"))?;
    let ((target_train, _), (target_test, _)) = split_train_test(&target, dataset.train_ratio, seed)?;
    Ok(Domains {
        source_train,
        source_test,
        target_train,
        target_test,
    })
}

/// Everything that precedes feedback: data, the source model and its scores.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub domains: Domains,
    pub model: MlpModel,
    /// Source-calibrated thresholds (binary mode only).
    pub thresholds: Option<ThresholdFit>,
    pub source_acc: f64,
    pub target_acc: f64,
    pub target_auroc: Option<f64>,
}

impl Prepared {
    pub fn threshold_values(&self) -> Option<&[f64]> {
        self.thresholds.as_ref().map(|t| t.thresholds.as_slice())
    }

    pub fn pretrain_summary(&self) -> PretrainSummary {
        PretrainSummary {
            source_acc: self.source_acc,
            target_acc: self.target_acc,
            target_auroc: self.target_auroc,
            thresholds: self.thresholds.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub source_acc: f64,
    pub target_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_auroc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdFit>,
}

/// Key shared by configurations that produce the same [`Prepared`] for a seed.
pub fn preparation_key(cfg: &ExperimentConfig) -> String {
    let json = serde_json::to_string(&(&cfg.dataset, &cfg.pretrain)).expect("serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn prepare(cfg: &ExperimentConfig, seed: u64) -> Result<Prepared> {
    let domains = generate_domains(&cfg.dataset, seed)?;
    let model = pretrain(&domains.source_train, cfg.dataset.head(), &cfg.pretrain, seed)?;
    score_source_model(domains, model)
}

/// Builds a [`Prepared`] around an existing source model.
pub fn score_source_model(domains: Domains, model: MlpModel) -> Result<Prepared> {
    let (thresholds, target_auroc) = match model.head() {
        Head::Softmax => (None, None),
        Head::SigmoidPerOutput => (
            Some(source_thresholds(&model, &domains.source_test)?),
            Some(mean_auroc(&model, &domains.target_test)?.0),
        ),
    };
    let t = thresholds.as_ref().map(|t| t.thresholds.as_slice());
    let source_acc = top1_accuracy(&model, &domains.source_test, t)?;
    let target_acc = top1_accuracy(&model, &domains.target_test, t)?;
    Ok(Prepared {
        domains,
        model,
        thresholds,
        source_acc,
        target_acc,
        target_auroc,
    })
}

/// Labeled/unlabeled partition of the target training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackSplit {
    Multiclass(TargetSplit),
    Binary(BinarySplit),
}

impl FeedbackSplit {
    pub fn shortages(&self) -> &[Shortage] {
        match self {
            FeedbackSplit::Multiclass(s) => &s.provenance.shortages,
            FeedbackSplit::Binary(s) => &s.provenance.shortages,
        }
    }

    pub fn labeled_count(&self) -> usize {
        match self {
            FeedbackSplit::Multiclass(s) => s.labeled.len(),
            FeedbackSplit::Binary(s) => s.findings.iter().map(|f| f.labeled.len()).sum(),
        }
    }
}

pub fn make_split(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<FeedbackSplit> {
    let train = &prepared.domains.target_train;
    Ok(match prepared.threshold_values() {
        None => FeedbackSplit::Multiclass(simulate_feedback(train, &prepared.model, &cfg.feedback, seed)?),
        Some(t) => FeedbackSplit::Binary(simulate_feedback_binary(
            train,
            &prepared.model,
            t,
            &cfg.feedback,
            seed,
        )?),
    })
}

pub fn adapt_split(
    prepared: &Prepared,
    split: &FeedbackSplit,
    cfg: &AdaptConfig,
    seed: u64,
) -> Result<AdaptOutcome> {
    let d = &prepared.domains;
    match split {
        FeedbackSplit::Multiclass(s) => adapt(&prepared.model, s, &d.target_train, Some(&d.target_test), cfg, seed),
        FeedbackSplit::Binary(s) => {
            let t = prepared
                .threshold_values()
                .ok_or_else(|| Error::InvalidConfig("binary split without thresholds".into()))?;
            adapt_binary(&prepared.model, s, &d.target_train, Some(&d.target_test), t, cfg, seed)
        }
    }
}

/// Final scores of one run; everything here is a deterministic function of (config, seed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub config_hash: String,
    pub seed: u64,
    pub source_acc: f64,
    /// Target test accuracy of the source model before adaptation.
    pub source_target_acc: f64,
    pub target_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_target_auroc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_auroc: Option<f64>,
    pub labeled: usize,
    pub shortages: Vec<Shortage>,
    pub fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub seed: u64,
    /// Sweep axis name to cell label.
    #[serde(default)]
    pub cell: BTreeMap<String, String>,
    pub epochs: Vec<EpochRecord>,
    pub final_metrics: Option<FinalMetrics>,
    /// Set when the run failed; the sweep carries on.
    #[serde(default)]
    pub error: Option<String>,
    pub wall_clock_secs: f64,
}

/// Result of one complete run, including the artefacts needed for plotting.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub split: FeedbackSplit,
    pub model: MlpModel,
}

/// Feedback simulation and adaptation on top of `prepared`.
pub fn run_prepared(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<RunOutput> {
    let start = Instant::now();
    let split = make_split(cfg, prepared, seed)?;
    let outcome = adapt_split(prepared, &split, &cfg.adapt, seed)?;
    let last = outcome.epochs.last();
    let hash = cfg.hash();
    let final_metrics = FinalMetrics {
        config_hash: hash.clone(),
        seed,
        source_acc: prepared.source_acc,
        source_target_acc: prepared.target_acc,
        target_acc: last.and_then(|e| e.test_acc).unwrap_or(prepared.target_acc),
        source_target_auroc: prepared.target_auroc,
        target_auroc: last.and_then(|e| e.test_auroc).or(prepared.target_auroc),
        labeled: split.labeled_count(),
        shortages: split.shortages().to_vec(),
        fallbacks: outcome.total_fallbacks(),
    };
    Ok(RunOutput {
        record: RunRecord {
            config_hash: hash,
            seed,
            cell: BTreeMap::new(),
            epochs: outcome.epochs,
            final_metrics: Some(final_metrics),
            error: None,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
        split,
        model: outcome.model,
    })
}

pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let prepared = prepare(cfg, seed)?;
    run_prepared(cfg, &prepared, seed)
}
