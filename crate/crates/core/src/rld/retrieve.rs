use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bank::{BankEntry, CandidateBank};
use super::kmeans::kmeans;
use super::{EmptyClassFallback, RldConfig, Strategy, KMEANS_ITERATIONS};
use crate::error::{Error, Result};
use crate::nn::{loss_ce, GradientSet, Matrix, MlpModel};
use crate::Point;

/// A bank sample appended to the mini-batch on behalf of one labeled sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefendingPair {
    pub point: Point,
    /// Training target for this sample.
    pub label: usize,
    /// Ground truth of the labeled sample it was retrieved for.
    pub anchor_label: usize,
    /// Training-set index of the bank entry; `None` for duplicated labeled samples.
    pub source_index: Option<usize>,
    /// Set when the empty-class fallback produced this pair.
    pub fallback: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Retrieval {
    pub pairs: Vec<DefendingPair>,
    /// Labeled samples whose class bank was empty.
    pub fallbacks: usize,
}

/// Per-epoch retrieval state: k-means picks and bank features are computed once.
#[derive(Debug)]
pub struct DefendingRetriever<'a> {
    bank: &'a CandidateBank,
    strategy: Strategy,
    fallback: EmptyClassFallback,
    k: usize,
    model: Option<&'a MlpModel>,
    all_entries: Vec<&'a BankEntry>,
    /// Positions into `bank.class(c)`, in retrieval order.
    kmeans_picks: Vec<Vec<usize>>,
    class_features: Vec<Matrix>,
}

fn draw_positions<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    if n >= k {
        sample(rng, n, k).into_vec()
    } else {
        (0..k).map(|_| rng.random_range(0..n)).collect()
    }
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl<'a> DefendingRetriever<'a> {
    /// `model` must be the frozen model that built the bank; it is required for
    /// [`Strategy::CosineDistant`]. `rng` seeds k-means initialisation.
    pub fn new<R: Rng + ?Sized>(
        bank: &'a CandidateBank,
        cfg: &RldConfig,
        k: usize,
        model: Option<&'a MlpModel>,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut kmeans_picks = Vec::new();
        let mut class_features = Vec::new();
        match cfg.strategy {
            Strategy::KMeansCenter => {
                for c in 0..bank.num_classes() {
                    let entries = bank.class(c);
                    let points: Vec<Point> = entries.iter().map(|e| e.point).collect();
                    let km = kmeans(&points, cfg.clusters(), KMEANS_ITERATIONS, rng);
                    kmeans_picks.push(nearest_to_centroids(&points, &km.centroids, &km.assignment, k));
                }
            }
            Strategy::CosineDistant => {
                let model = model.ok_or_else(|| {
                    Error::InvalidConfig("cosine-distant retrieval needs the bank model".into())
                })?;
                for c in 0..bank.num_classes() {
                    let points: Vec<Point> = bank.class(c).iter().map(|e| e.point).collect();
                    class_features.push(model.penultimate_features(&Matrix::from_points(&points))?);
                }
            }
            _ => {}
        }
        Ok(Self {
            bank,
            strategy: cfg.strategy,
            fallback: cfg.empty_class_fallback,
            k,
            model,
            all_entries: bank.iter().collect(),
            kmeans_picks,
            class_features,
        })
    }

    /// `k` defending pairs per labeled `(point, class)`, in labeled order.
    pub fn retrieve<R: Rng + ?Sized>(
        &self,
        labeled: &[(Point, usize)],
        current_epoch: usize,
        rng: &mut R,
    ) -> Result<Retrieval> {
        if self.bank.epoch() != current_epoch {
            return Err(Error::StaleBank {
                bank_epoch: self.bank.epoch(),
                current_epoch,
            });
        }
        let mut out = Retrieval::default();
        if self.k == 0 {
            return Ok(out);
        }
        let labeled_features = match self.strategy {
            Strategy::CosineDistant => {
                let points: Vec<Point> = labeled.iter().map(|l| l.0).collect();
                Some(
                    self.model
                        .expect("checked in new")
                        .penultimate_features(&Matrix::from_points(&points))?,
                )
            }
            _ => None,
        };
        for (row, &(x, y)) in labeled.iter().enumerate() {
            let class_entries = self.bank.class(y);
            let pool_empty = match self.strategy {
                Strategy::UnconditionedRandom => self.all_entries.is_empty(),
                _ => class_entries.is_empty(),
            };
            if pool_empty {
                out.fallbacks += 1;
                if self.fallback == EmptyClassFallback::DuplicateLabeled {
                    out.pairs.extend((0..self.k).map(|_| DefendingPair {
                        point: x,
                        label: y,
                        anchor_label: y,
                        source_index: None,
                        fallback: true,
                    }));
                }
                continue;
            }
            let picked: Vec<&BankEntry> = match self.strategy {
                Strategy::ClassAwareRandom => draw_positions(class_entries.len(), self.k, rng)
                    .into_iter()
                    .map(|i| &class_entries[i])
                    .collect(),
                Strategy::UnconditionedRandom => draw_positions(self.all_entries.len(), self.k, rng)
                    .into_iter()
                    .map(|i| self.all_entries[i])
                    .collect(),
                Strategy::KMeansCenter => self.kmeans_picks[y].iter().map(|&i| &class_entries[i]).collect(),
                Strategy::CosineDistant => {
                    let feats = &self.class_features[y];
                    let anchor = labeled_features.as_ref().expect("computed above").row(row);
                    let mut order: Vec<(f64, usize)> = (0..class_entries.len())
                        .map(|i| (cosine_distance(anchor, feats.row(i)), i))
                        .collect();
                    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
                    order
                        .iter()
                        .cycle()
                        .take(self.k)
                        .map(|&(_, i)| &class_entries[i])
                        .collect()
                }
            };
            out.pairs.extend(picked.into_iter().map(|e| DefendingPair {
                point: e.point,
                label: e.label,
                anchor_label: y,
                source_index: Some(e.index),
                fallback: false,
            }));
        }
        Ok(out)
    }
}

/// Round-robin over centroids, each time taking that centroid's nearest
/// not-yet-used member; cycles through the picks when fewer than `k` exist.
fn nearest_to_centroids(points: &[Point], centroids: &[Point], assignment: &[usize], k: usize) -> Vec<usize> {
    if points.is_empty() {
        return Vec::new();
    }
    let d2 = |i: usize, c: usize| {
        let (p, q) = (points[i], centroids[c]);
        (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
    };
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centroids.len()];
    for (i, &a) in assignment.iter().enumerate() {
        members[a].push(i);
    }
    for (c, m) in members.iter_mut().enumerate() {
        m.sort_by(|&a, &b| d2(a, c).partial_cmp(&d2(b, c)).unwrap().then(a.cmp(&b)));
    }
    let mut picks = Vec::with_capacity(k);
    let mut depth = 0;
    while picks.len() < k.min(points.len()) {
        for m in &members {
            if let Some(&i) = m.get(depth) {
                if picks.len() < k {
                    picks.push(i);
                }
            }
        }
        depth += 1;
    }
    let n = picks.len();
    (0..k).map(|i| picks[i % n]).collect()
}

/// Convenience wrapper building a one-off [`DefendingRetriever`] with `cfg.k`.
pub fn retrieve_defending<R: Rng + ?Sized>(
    bank: &CandidateBank,
    labeled: &[(Point, usize)],
    cfg: &RldConfig,
    model: Option<&MlpModel>,
    current_epoch: usize,
    rng: &mut R,
) -> Result<Retrieval> {
    DefendingRetriever::new(bank, cfg, cfg.k, model, rng)?.retrieve(labeled, current_epoch, rng)
}

/// Mean cross-entropy of the model on defending pairs against their labels.
pub fn rld_loss(model: &MlpModel, pairs: &[DefendingPair]) -> Result<(f64, GradientSet)> {
    if pairs.is_empty() {
        return Ok((0.0, GradientSet::zeros_like(model)));
    }
    let points: Vec<Point> = pairs.iter().map(|p| p.point).collect();
    let targets: Vec<usize> = pairs.iter().map(|p| p.label).collect();
    let trace = model.forward(&Matrix::from_points(&points))?;
    let lg = loss_ce(trace.probabilities(), &targets, None)?;
    Ok((lg.loss, model.backward(&trace, &lg.grad)?))
}
