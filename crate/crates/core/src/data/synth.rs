use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Domain, LabeledSet};
use crate::error::{Error, Result};
use crate::rng::substream;
use crate::Point;

/// Rigid shift applied to target samples: rotation about a pivot, then translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub translation: Point,
    /// Radians, in `(-pi, pi]`.
    pub rotation: f64,
    #[serde(default)]
    pub per_class_translation: Option<Vec<Point>>,
}

impl ShiftSpec {
    pub fn identity() -> Self {
        Self {
            translation: [0.0, 0.0],
            rotation: 0.0,
            per_class_translation: None,
        }
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        if !(self.rotation > -PI && self.rotation <= PI) {
            return Err(Error::InvalidConfig(format!(
                "shift rotation must be in (-pi, pi], got {}",
                self.rotation
            )));
        }
        if let Some(per_class) = &self.per_class_translation {
            if per_class.len() != num_classes {
                return Err(Error::InvalidConfig(format!(
                    "per_class_translation needs {num_classes} entries, got {}",
                    per_class.len()
                )));
            }
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("shift translation must be finite".into()));
        }
        Ok(())
    }

    pub fn apply(&self, p: Point, class: usize, pivot: Point) -> Point {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (p[0] - pivot[0], p[1] - pivot[1]);
        let mut out = [
            pivot[0] + c * dx - s * dy + self.translation[0],
            pivot[1] + s * dx + c * dy + self.translation[1],
        ];
        if let Some(per_class) = &self.per_class_translation {
            out[0] += per_class[class][0];
            out[1] += per_class[class][1];
        }
        out
    }

    pub fn invert(&self, p: Point, class: usize, pivot: Point) -> Point {
        let mut q = [p[0] - self.translation[0], p[1] - self.translation[1]];
        if let Some(per_class) = &self.per_class_translation {
            q[0] -= per_class[class][0];
            q[1] -= per_class[class][1];
        }
        let (s, c) = (-self.rotation).sin_cos();
        let (dx, dy) = (q[0] - pivot[0], q[1] - pivot[1]);
        [pivot[0] + c * dx - s * dy, pivot[1] + s * dx + c * dy]
    }
}

/// Multi-output mode: `count` binary findings, each a half-plane through the cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FindingSpec {
    pub count: usize,
    /// Signed offset of every boundary from the pivot; positive lowers prevalence.
    #[serde(default)]
    pub offset: f64,
}

impl FindingSpec {
    /// Finding `f` is positive when `n_f . (x - pivot) > offset`, with
    /// `n_f` at angle `pi (f + 0.5) / count`.
    pub fn label(&self, p: Point, pivot: Point) -> Vec<u8> {
        (0..self.count)
            .map(|f| {
                let angle = PI * (f as f64 + 0.5) / self.count as f64;
                let proj = angle.cos() * (p[0] - pivot[0]) + angle.sin() * (p[1] - pivot[1]);
                u8::from(proj > self.offset)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobsSpec {
    pub samples_per_class: usize,
    pub centers: Vec<Point>,
    pub std: f64,
    pub shift: ShiftSpec,
    #[serde(default)]
    pub findings: Option<FindingSpec>,
}

impl Default for BlobsSpec {
    fn default() -> Self {
        Self {
            samples_per_class: 400,
            centers: vec![[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]],
            std: 0.8,
            shift: ShiftSpec {
                translation: [1.2, 0.8],
                rotation: 0.4,
                per_class_translation: None,
            },
            findings: None,
        }
    }
}

impl BlobsSpec {
    pub fn num_classes(&self) -> usize {
        self.centers.len()
    }

    /// Rotation pivot: mean of the class centers.
    pub fn pivot(&self) -> Point {
        super::centroid(&self.centers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.centers.is_empty() || self.samples_per_class == 0 {
            return Err(Error::Validation(
                "blobs need at least one class and one sample per class".into(),
            ));
        }
        if !(self.std.is_finite() && self.std > 0.0) {
            return Err(Error::Validation(format!("blobs std must be > 0, got {}", self.std)));
        }
        if let Some(f) = &self.findings {
            if f.count == 0 {
                return Err(Error::Validation("finding count must be > 0".into()));
            }
        }
        self.shift.validate(self.num_classes())
    }

    fn draw<R: Rng>(&self, rng: &mut R, domain: Domain) -> Result<LabeledSet> {
        let noise = Normal::new(0.0, self.std).map_err(|e| Error::Validation(e.to_string()))?;
        let pivot = self.pivot();
        let mut points = Vec::with_capacity(self.samples_per_class * self.num_classes());
        let mut labels = Vec::with_capacity(points.capacity());
        let mut findings = Vec::new();
        for (c, center) in self.centers.iter().enumerate() {
            for _ in 0..self.samples_per_class {
                let p = [center[0] + noise.sample(rng), center[1] + noise.sample(rng)];
                if let Some(f) = &self.findings {
                    findings.push(f.label(p, pivot));
                }
                points.push(match domain {
                    Domain::Source => p,
                    Domain::Target => self.shift.apply(p, c, pivot),
                });
                labels.push(c);
            }
        }
        let set = LabeledSet::new(points, labels, self.num_classes(), domain)?;
        match self.findings {
            Some(_) => set.with_findings(findings),
            None => Ok(set),
        }
    }
}

/// Source blobs and an independently drawn, shifted target.
///
/// In multi-output mode findings are labeled from the pre-shift position, so
/// the shift moves points without changing their ground truth.
pub fn make_blobs_pair(spec: &BlobsSpec, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    spec.validate()?;
    let source = spec.draw(&mut substream(seed, "blobs/source"), Domain::Source)?;
    let target = spec.draw(&mut substream(seed, "blobs/target"), Domain::Target)?;
    Ok((source, target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoonsSpec {
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub shift: ShiftSpec,
}

impl Default for MoonsSpec {
    fn default() -> Self {
        Self {
            samples_per_class: 500,
            noise_std: 0.08,
            shift: ShiftSpec {
                translation: [0.2, 0.4],
                rotation: 0.0,
                per_class_translation: None,
            },
        }
    }
}

impl MoonsSpec {
    /// Centre of the two half-circles' bounding box.
    pub const PIVOT: Point = [0.5, 0.25];

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_class == 0 {
            return Err(Error::Validation("moons need at least one sample per class".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return Err(Error::Validation(format!(
                "moons noise_std must be > 0, got {}",
                self.noise_std
            )));
        }
        self.shift.validate(2)
    }

    fn draw<R: Rng>(&self, rng: &mut R, domain: Domain) -> Result<LabeledSet> {
        let noise = Normal::new(0.0, self.noise_std).map_err(|e| Error::Validation(e.to_string()))?;
        let n = self.samples_per_class;
        let mut points = Vec::with_capacity(2 * n);
        let mut labels = Vec::with_capacity(2 * n);
        for class in 0..2 {
            for _ in 0..n {
                let t = rng.random_range(0.0..=PI);
                let base = if class == 0 {
                    [t.cos(), t.sin()]
                } else {
                    [1.0 - t.cos(), 0.5 - t.sin()]
                };
                let p = [base[0] + noise.sample(rng), base[1] + noise.sample(rng)];
                points.push(match domain {
                    Domain::Source => p,
                    Domain::Target => self.shift.apply(p, class, Self::PIVOT),
                });
                labels.push(class);
            }
        }
        LabeledSet::new(points, labels, 2, domain)
    }
}

/// Two interleaving half-circles (class 0 upper, class 1 lower) with Gaussian noise.
pub fn make_moons_pair(spec: &MoonsSpec, seed: u64) -> Result<(LabeledSet, LabeledSet)> {
    spec.validate()?;
    let source = spec.draw(&mut substream(seed, "moons/source"), Domain::Source)?;
    let target = spec.draw(&mut substream(seed, "moons/target"), Domain::Target)?;
    Ok((source, target))
}
