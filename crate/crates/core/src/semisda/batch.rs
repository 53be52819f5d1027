use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rld::{DefendingPair, DefendingRetriever};
use crate::Point;

/// Mini-batch composition: `labeled` feedback samples, `mu * labeled` unlabeled
/// samples and `k * labeled` defending samples (`k = 0` disables retrieval).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSpec {
    pub labeled: usize,
    pub mu: usize,
    pub k: usize,
}

impl Default for BatchSpec {
    fn default() -> Self {
        Self {
            labeled: 16,
            mu: 7,
            k: 0,
        }
    }
}

impl BatchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.labeled == 0 {
            return Err(Error::InvalidConfig("batch.labeled must be >= 1".into()));
        }
        Ok(())
    }

    pub fn unlabeled(&self) -> usize {
        self.mu * self.labeled
    }

    pub fn defending(&self) -> usize {
        self.k * self.labeled
    }

    /// `ceil(n_unlabeled / (mu B))`, or `ceil(n_labeled / B)` when `mu = 0`.
    pub fn steps_per_epoch(&self, n_labeled: usize, n_unlabeled: usize) -> usize {
        if self.mu > 0 {
            n_unlabeled.div_ceil(self.unlabeled())
        } else {
            n_labeled.div_ceil(self.labeled)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    pub labeled: Vec<(Point, usize)>,
    pub unlabeled: Vec<Point>,
    pub defending: Vec<DefendingPair>,
    /// Labeled samples whose class bank was empty during retrieval.
    pub fallbacks: usize,
}

/// Endless pass over a pool: shuffled order, reshuffled whenever it is exhausted.
#[derive(Debug, Clone)]
pub(crate) struct CyclingSampler {
    order: Vec<usize>,
    pos: usize,
}

impl CyclingSampler {
    pub fn new(pool: Vec<usize>) -> Self {
        let pos = pool.len();
        Self { order: pool, pos }
    }

    pub fn take<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n)
            .map(|_| {
                if self.pos == self.order.len() {
                    self.order.shuffle(rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.order[self.pos - 1]
            })
            .collect()
    }
}

/// Draws mini-batches for one adaptation run.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    spec: BatchSpec,
    labeled: Vec<(Point, usize)>,
    unlabeled: Vec<Point>,
    labeled_cycle: CyclingSampler,
    unlabeled_cycle: CyclingSampler,
}

impl BatchSampler {
    /// `labeled` pairs and `unlabeled` points form the two pools.
    pub fn new(spec: BatchSpec, labeled: Vec<(Point, usize)>, unlabeled: Vec<Point>) -> Result<Self> {
        spec.validate()?;
        if labeled.is_empty() {
            return Err(Error::Validation("no labeled feedback to adapt with".into()));
        }
        if spec.mu > 0 && unlabeled.is_empty() {
            return Err(Error::Validation("unlabeled pool is empty but mu > 0".into()));
        }
        Ok(Self {
            spec,
            labeled_cycle: CyclingSampler::new((0..labeled.len()).collect()),
            unlabeled_cycle: CyclingSampler::new((0..unlabeled.len()).collect()),
            labeled,
            unlabeled,
        })
    }

    pub fn spec(&self) -> BatchSpec {
        self.spec
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.spec.steps_per_epoch(self.labeled.len(), self.unlabeled.len())
    }

    /// Samples labeled and unlabeled data from `batch_rng` and, when `k > 0`,
    /// defending pairs from `retriever` using `retrieve_rng`.
    pub fn next_batch<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        &mut self,
        retriever: Option<&DefendingRetriever<'_>>,
        epoch: usize,
        batch_rng: &mut R1,
        retrieve_rng: &mut R2,
    ) -> Result<MiniBatch> {
        let labeled: Vec<(Point, usize)> = self
            .labeled_cycle
            .take(self.spec.labeled, batch_rng)
            .into_iter()
            .map(|i| self.labeled[i])
            .collect();
        let unlabeled: Vec<Point> = self
            .unlabeled_cycle
            .take(self.spec.unlabeled(), batch_rng)
            .into_iter()
            .map(|i| self.unlabeled[i])
            .collect();
        let (defending, fallbacks) = if self.spec.k > 0 {
            let retriever = retriever.ok_or_else(|| {
                Error::InvalidConfig("batch.k > 0 requires a candidate bank".into())
            })?;
            let r = retriever.retrieve(&labeled, epoch, retrieve_rng)?;
            (r.pairs, r.fallbacks)
        } else {
            (Vec::new(), 0)
        };
        Ok(MiniBatch {
            labeled,
            unlabeled,
            defending,
            fallbacks,
        })
    }
}
