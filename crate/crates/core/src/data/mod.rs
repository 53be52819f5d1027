//! Synthetic source/target dataset pairs with a controlled domain shift.

mod csv_io;
mod split;
mod synth;

pub use csv_io::{read_csv, write_csv, CsvPartition};
pub use split::{split_train_test, IndexedPart};
pub use synth::{make_blobs_pair, make_moons_pair, BlobsSpec, FindingSpec, MoonsSpec, ShiftSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;
use crate::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

/// Points with class labels and, in multi-output mode, per-sample binary findings.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub points: Vec<Point>,
    pub labels: Vec<usize>,
    /// `findings[i][f]` is finding `f` of sample `i`.
    pub findings: Option<Vec<Vec<u8>>>,
    pub num_classes: usize,
    pub domain: Domain,
}

impl LabeledSet {
    pub fn new(points: Vec<Point>, labels: Vec<usize>, num_classes: usize, domain: Domain) -> Result<Self> {
        let set = Self {
            points,
            labels,
            findings: None,
            num_classes,
            domain,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_findings(mut self, findings: Vec<Vec<u8>>) -> Result<Self> {
        self.findings = Some(findings);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.labels.len() {
            return Err(Error::shape("LabeledSet labels", self.points.len(), self.labels.len()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::Validation(format!(
                "label {bad} out of range for {} classes",
                self.num_classes
            )));
        }
        if let Some(f) = &self.findings {
            if f.len() != self.points.len() {
                return Err(Error::shape("LabeledSet findings", self.points.len(), f.len()));
            }
            let width = f.first().map_or(0, Vec::len);
            if f.iter().any(|row| row.len() != width || row.iter().any(|&v| v > 1)) {
                return Err(Error::Validation(
                    "findings must be equally sized 0/1 rows".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_findings(&self) -> usize {
        self.findings
            .as_ref()
            .and_then(|f| f.first())
            .map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> Matrix {
        Matrix::from_points(&self.points)
    }

    /// Binary finding targets as an `n x F` matrix.
    pub fn finding_matrix(&self) -> Option<Matrix> {
        let f = self.findings.as_ref()?;
        let width = self.num_findings();
        let data = f.iter().flatten().map(|&v| f64::from(v)).collect();
        Some(Matrix::from_vec(f.len(), width, data).expect("validated finding rows"))
    }

    /// Indices of samples labeled `class`, ascending.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }

    /// New set holding the given samples, in order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            findings: self
                .findings
                .as_ref()
                .map(|f| indices.iter().map(|&i| f[i].clone()).collect()),
            num_classes: self.num_classes,
            domain: self.domain,
        }
    }

    /// Root-mean-square distance of the points from their centroid.
    pub fn rms_radius(&self) -> f64 {
        let c = centroid(&self.points);
        let ss: f64 = self
            .points
            .iter()
            .map(|p| (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2))
            .sum();
        (ss / self.len().max(1) as f64).sqrt()
    }
}

pub fn centroid(points: &[Point]) -> Point {
    let n = points.len().max(1) as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}
