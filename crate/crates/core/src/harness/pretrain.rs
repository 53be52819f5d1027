use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::nn::{loss_bce, loss_ce, sgd_step, Head, MlpModel, SgdConfig, SgdState};
use crate::rng::substream;

/// Supervised training of the source model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub sgd: SgdConfig,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            epochs: 60,
            batch_size: 32,
            sgd: SgdConfig {
                learning_rate: 0.05,
                momentum: 0.9,
                weight_decay: 0.0,
            },
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.sgd.validate()?;
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidConfig(
                "pretrain.hidden needs at least one non-zero layer width".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("pretrain.batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trains a fresh model on `source`: a softmax classifier over the labels, or a
/// sigmoid multi-output model over the findings when `head` is sigmoid.
pub fn pretrain(source: &LabeledSet, head: Head, cfg: &PretrainConfig, seed: u64) -> Result<MlpModel> {
    cfg.validate()?;
    if source.is_empty() {
        return Err(Error::Validation("cannot pretrain on an empty source set".into()));
    }
    let outputs = match head {
        Head::Softmax => source.num_classes,
        Head::SigmoidPerOutput => source.num_findings(),
    };
    let mut dims = vec![2];
    dims.extend(&cfg.hidden);
    dims.push(outputs);
    let mut rng = substream(seed, "pretrain");
    let mut model = MlpModel::new(&dims, head, &mut rng)?;
    let findings = source.finding_matrix();
    if head == Head::SigmoidPerOutput && findings.is_none() {
        return Err(Error::Validation("sigmoid pretraining needs findings".into()));
    }
    let inputs = source.inputs();
    let mut state = SgdState::new(&model);
    let mut order: Vec<usize> = (0..source.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let x = inputs.select_rows(chunk);
            let trace = model.forward(&x)?;
            let lg = match (&findings, head) {
                (Some(f), Head::SigmoidPerOutput) => loss_bce(trace.probabilities(), &f.select_rows(chunk))?,
                _ => {
                    let y: Vec<usize> = chunk.iter().map(|&i| source.labels[i]).collect();
                    loss_ce(trace.probabilities(), &y, None)?
                }
            };
            if !lg.loss.is_finite() {
                return Err(Error::NonFinite(format!("pretraining loss at epoch {epoch}")));
            }
            let grads = model.backward(&trace, &lg.grad)?;
            sgd_step(&mut model, &grads, &cfg.sgd, &mut state)?;
        }
    }
    Ok(model)
}
