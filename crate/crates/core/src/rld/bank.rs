use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::select::desc_then_index;
use crate::nn::{argmax, Head, Matrix, MlpModel};
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BankEntry {
    /// Index of the sample in the training set.
    pub index: usize,
    pub point: Point,
    pub label: usize,
    pub confidence: f64,
}

/// Per-class pseudo-labeled candidates, immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateBank {
    classes: Vec<Vec<BankEntry>>,
    pool_sizes: Vec<usize>,
    epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankStats {
    pub sizes: Vec<usize>,
    /// Unlabeled samples pseudo-labeled as each class before filtering.
    pub pool_sizes: Vec<usize>,
    /// Per class `[min, median, max]` confidence of retained entries; empty for empty classes.
    pub confidence_quantiles: Vec<Vec<f64>>,
}

impl CandidateBank {
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Entries pseudo-labeled `class`, by descending confidence.
    pub fn class(&self, class: usize) -> &[BankEntry] {
        self.classes.get(class).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &BankEntry> {
        self.classes.iter().flatten()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.classes.iter().map(Vec::len).collect()
    }

    pub fn stats(&self) -> BankStats {
        BankStats {
            sizes: self.sizes(),
            pool_sizes: self.pool_sizes.clone(),
            confidence_quantiles: self
                .classes
                .iter()
                .map(|c| match c.len() {
                    0 => Vec::new(),
                    n => vec![c[n - 1].confidence, c[n / 2].confidence, c[0].confidence],
                })
                .collect(),
        }
    }
}

/// Pseudo-labels every unlabeled point with the frozen `model` and keeps the
/// top `ceil(p * n_c)` entries of each class by max-softmax confidence
/// (ties by ascending index).
pub fn generate_bank(
    model: &MlpModel,
    points: &[Point],
    indices: &[usize],
    p: f64,
    epoch: usize,
) -> Result<CandidateBank> {
    if model.head() != Head::Softmax {
        return Err(Error::InvalidConfig("candidate bank needs a softmax head".into()));
    }
    if points.len() != indices.len() {
        return Err(Error::shape("generate_bank indices", points.len(), indices.len()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("filtering rate must be in (0, 1], got {p}")));
    }
    let num_classes = model.output_dim();
    let mut classes: Vec<Vec<BankEntry>> = vec![Vec::new(); num_classes];
    if !points.is_empty() {
        let probs: Matrix = model.probabilities(&Matrix::from_points(points))?;
        for (r, row) in probs.iter_rows().enumerate() {
            let label = argmax(row);
            classes[label].push(BankEntry {
                index: indices[r],
                point: points[r],
                label,
                confidence: row[label],
            });
        }
    }
    let pool_sizes = classes.iter().map(Vec::len).collect();
    for entries in &mut classes {
        entries.sort_by(|a, b| desc_then_index(a.confidence, b.confidence, a.index, b.index));
        // Tolerance keeps e.g. 0.7 * 10 from rounding up to 8.
        let keep = (p * entries.len() as f64 - 1e-9).ceil().max(0.0) as usize;
        entries.truncate(keep);
    }
    Ok(CandidateBank {
        classes,
        pool_sizes,
        epoch,
    })
}

/// Bank group used by binary mode for `finding` taking `value`.
pub fn finding_group(finding: usize, value: u8) -> usize {
    2 * finding + usize::from(value)
}

/// Binary-mode bank: one group per (finding, thresholded value), ranked by the
/// margin `|p - threshold|` and filtered to the top `ceil(p * n)` per group.
///
/// A sample appears once in every finding's group, so entries repeat across findings.
pub fn generate_finding_bank(
    model: &MlpModel,
    points: &[Point],
    indices: &[usize],
    thresholds: &[f64],
    p: f64,
    epoch: usize,
) -> Result<CandidateBank> {
    if model.head() != Head::SigmoidPerOutput {
        return Err(Error::InvalidConfig("finding bank needs a sigmoid head".into()));
    }
    if points.len() != indices.len() {
        return Err(Error::shape("generate_finding_bank indices", points.len(), indices.len()));
    }
    if thresholds.len() != model.output_dim() {
        return Err(Error::shape("finding thresholds", model.output_dim(), thresholds.len()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidConfig(format!("filtering rate must be in (0, 1], got {p}")));
    }
    let mut classes: Vec<Vec<BankEntry>> = vec![Vec::new(); 2 * thresholds.len()];
    if !points.is_empty() {
        let probs = model.probabilities(&Matrix::from_points(points))?;
        for (r, row) in probs.iter_rows().enumerate() {
            for (f, (&prob, &thr)) in row.iter().zip(thresholds).enumerate() {
                let group = finding_group(f, u8::from(prob >= thr));
                classes[group].push(BankEntry {
                    index: indices[r],
                    point: points[r],
                    label: group,
                    confidence: (prob - thr).abs(),
                });
            }
        }
    }
    let pool_sizes = classes.iter().map(Vec::len).collect();
    for entries in &mut classes {
        entries.sort_by(|a, b| desc_then_index(a.confidence, b.confidence, a.index, b.index));
        let keep = (p * entries.len() as f64 - 1e-9).ceil().max(0.0) as usize;
        entries.truncate(keep);
    }
    Ok(CandidateBank {
        classes,
        pool_sizes,
        epoch,
    })
}
