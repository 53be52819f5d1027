use serde::{Deserialize, Serialize};

use super::mlp::{GradientSet, MlpModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// Momentum buffers carried between steps.
#[derive(Debug, Clone)]
pub struct SgdState {
    velocity: GradientSet,
}

impl SgdState {
    pub fn new(model: &MlpModel) -> Self {
        Self {
            velocity: GradientSet::zeros_like(model),
        }
    }

    pub fn velocity(&self) -> &GradientSet {
        &self.velocity
    }
}

/// `v <- momentum * v + g + weight_decay * theta; theta <- theta - lr * v`.
///
/// The model is left untouched when the gradients contain non-finite values.
pub fn sgd_step(
    model: &mut MlpModel,
    grads: &GradientSet,
    cfg: &SgdConfig,
    state: &mut SgdState,
) -> Result<()> {
    if !grads.is_congruent(model) || !state.velocity.is_congruent(model) {
        return Err(Error::shape(
            "sgd_step",
            format!("{:?}", model.layer_dims()),
            "incongruent gradient or velocity",
        ));
    }
    if !grads.is_finite() {
        return Err(Error::NonFinite("sgd_step gradients".into()));
    }
    let (lr, mom, wd) = (cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    for l in 0..grads.weights.len() {
        let params = model.weights_mut()[l].data_mut();
        let vel = state.velocity.weights[l].data_mut();
        for ((p, v), g) in params.iter_mut().zip(vel.iter_mut()).zip(grads.weights[l].data()) {
            *v = mom * *v + g + wd * *p;
            *p -= lr * *v;
        }
        let params = &mut model.biases_mut()[l];
        let vel = &mut state.velocity.biases[l];
        for ((p, v), g) in params.iter_mut().zip(vel.iter_mut()).zip(&grads.biases[l]) {
            *v = mom * *v + g + wd * *p;
            *p -= lr * *v;
        }
    }
    Ok(())
}
