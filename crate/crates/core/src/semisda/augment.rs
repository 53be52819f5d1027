use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::centroid;
use crate::error::{Error, Result};
use crate::Point;

/// Weak and strong 2-D augmentations.
///
/// Weak adds isotropic Gaussian noise. Strong adds larger noise, then rescales
/// each point about `center` by a factor drawn uniformly from `strong_scale_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmenterSpec {
    pub weak_noise_std: f64,
    pub strong_noise_std: f64,
    pub strong_scale_range: [f64; 2],
    pub center: Point,
}

impl AugmenterSpec {
    /// Noise scaled to the RMS radius of `points`: 3% weak, 15% strong, scale in [0.9, 1.1].
    pub fn for_points(points: &[Point]) -> Self {
        let center = centroid(points);
        let radius = if points.is_empty() {
            0.0
        } else {
            let ms: f64 = points
                .iter()
                .map(|p| (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2))
                .sum::<f64>()
                / points.len() as f64;
            ms.sqrt()
        };
        Self {
            weak_noise_std: 0.03 * radius,
            strong_noise_std: 0.15 * radius,
            strong_scale_range: [0.9, 1.1],
            center,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.strong_scale_range;
        let ok = self.weak_noise_std >= 0.0
            && self.strong_noise_std >= self.weak_noise_std
            && self.strong_noise_std.is_finite()
            && lo > 0.0
            && lo <= 1.0
            && hi >= 1.0
            && hi.is_finite()
            && self.center.iter().all(|c| c.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "augmenter needs 0 <= weak_noise_std <= strong_noise_std and 0 < lo <= 1 <= hi, got {self:?}"
            )))
        }
    }

    pub fn augment_weak<R: Rng + ?Sized>(&self, points: &[Point], rng: &mut R) -> Vec<Point> {
        points
            .iter()
            .map(|p| jitter(*p, self.weak_noise_std, rng))
            .collect()
    }

    pub fn augment_strong<R: Rng + ?Sized>(&self, points: &[Point], rng: &mut R) -> Vec<Point> {
        let [lo, hi] = self.strong_scale_range;
        let c = self.center;
        points
            .iter()
            .map(|p| {
                let q = jitter(*p, self.strong_noise_std, rng);
                let s = lo + (hi - lo) * rng.random::<f64>();
                [c[0] + s * (q[0] - c[0]), c[1] + s * (q[1] - c[1])]
            })
            .collect()
    }
}

fn jitter<R: Rng + ?Sized>(p: Point, std: f64, rng: &mut R) -> Point {
    let dx: f64 = rng.sample(StandardNormal);
    let dy: f64 = rng.sample(StandardNormal);
    [p[0] + std * dx, p[1] + std * dy]
}
