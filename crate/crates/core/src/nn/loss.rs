//! Cross-entropy losses returning the loss value together with its gradient
//! with respect to the head probabilities.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    /// `d loss / d probs`, same shape as the probabilities.
    pub grad: Matrix,
    /// Total weight of the samples (or elements) that contributed.
    pub weight: f64,
}

impl LossGrad {
    /// True when every sample was masked out; loss and gradient are zero.
    pub fn is_empty(&self) -> bool {
        self.weight == 0.0
    }

    pub(crate) fn rescale(&mut self, factor: f64) {
        self.loss *= factor;
        self.grad.scale(factor);
    }
}

/// Mean of `-log p[target]` over unmasked rows.
///
/// `mask` holds one non-negative weight per row. The gradient is that of
/// `-log p` itself; the floor only guards the reported value.
pub fn loss_ce(probs: &Matrix, targets: &[usize], mask: Option<&[f64]>) -> Result<LossGrad> {
    if targets.len() != probs.rows() {
        return Err(Error::shape("loss_ce targets", probs.rows(), targets.len()));
    }
    if let Some(m) = mask {
        if m.len() != probs.rows() {
            return Err(Error::shape("loss_ce mask", probs.rows(), m.len()));
        }
    }
    if let Some((i, &t)) = targets.iter().enumerate().find(|(_, &t)| t >= probs.cols()) {
        return Err(Error::Validation(format!(
            "target class {t} at row {i} is out of range for {} outputs",
            probs.cols()
        )));
    }
    let weight_of = |r: usize| mask.map_or(1.0, |m| m[r]);
    let total: f64 = (0..probs.rows()).map(weight_of).sum();
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    if total == 0.0 {
        return Ok(LossGrad {
            loss: 0.0,
            grad,
            weight: 0.0,
        });
    }
    let mut loss = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let w = weight_of(r);
        if w == 0.0 {
            continue;
        }
        let p = probs.get(r, t);
        loss += -w * p.max(PROB_FLOOR).ln();
        grad.set(r, t, -w / (total * p.max(f64::MIN_POSITIVE)));
    }
    Ok(LossGrad {
        loss: loss / total,
        grad,
        weight: total,
    })
}

/// Mean binary cross-entropy over all (unmasked) elements.
pub fn loss_bce(probs: &Matrix, targets: &Matrix) -> Result<LossGrad> {
    loss_bce_masked(probs, targets, None)
}

/// Binary cross-entropy where `mask` (same shape, 0/1) selects the known entries.
pub fn loss_bce_masked(probs: &Matrix, targets: &Matrix, mask: Option<&Matrix>) -> Result<LossGrad> {
    let same = |m: &Matrix| m.rows() == probs.rows() && m.cols() == probs.cols();
    if !same(targets) {
        return Err(Error::shape(
            "loss_bce targets",
            format!("{}x{}", probs.rows(), probs.cols()),
            format!("{}x{}", targets.rows(), targets.cols()),
        ));
    }
    if let Some(m) = mask {
        if !same(m) {
            return Err(Error::shape(
                "loss_bce mask",
                format!("{}x{}", probs.rows(), probs.cols()),
                format!("{}x{}", m.rows(), m.cols()),
            ));
        }
    }
    if let Some(y) = targets.data().iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(Error::Validation(format!(
            "binary targets must be 0 or 1, found {y}"
        )));
    }
    let weight_of = |i: usize| mask.map_or(1.0, |m| m.data()[i]);
    let total: f64 = (0..probs.data().len()).map(weight_of).sum();
    let mut grad = Matrix::zeros(probs.rows(), probs.cols());
    if total == 0.0 {
        return Ok(LossGrad {
            loss: 0.0,
            grad,
            weight: 0.0,
        });
    }
    let mut loss = 0.0;
    for (i, (&p, &y)) in probs.data().iter().zip(targets.data()).enumerate() {
        let w = weight_of(i);
        if w == 0.0 {
            continue;
        }
        let q = 1.0 - p;
        loss -= w * (y * p.max(PROB_FLOOR).ln() + (1.0 - y) * q.max(PROB_FLOOR).ln());
        let g = -y / p.max(f64::MIN_POSITIVE) + (1.0 - y) / q.max(f64::MIN_POSITIVE);
        grad.data_mut()[i] = w * g / total;
    }
    Ok(LossGrad {
        loss: loss / total,
        grad,
        weight: total,
    })
}
