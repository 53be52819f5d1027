use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::StreamConfig;
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::eval::top1_accuracy;
use crate::feedback::TargetSplit;
use crate::nn::MlpModel;
use crate::rng::substream;
use crate::semisda::{adapt, AdaptConfig, EpochRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub fraction: f64,
    /// Stream items consumed when the checkpoint fired.
    pub items_seen: usize,
    /// Unlabeled samples held in memory at that point.
    pub occupancy: usize,
    pub labeled: usize,
    /// True when there was no feedback yet and adaptation was skipped.
    pub skipped: bool,
    pub test_acc: f64,
    pub epochs: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamOutcome {
    pub checkpoints: Vec<CheckpointRecord>,
    /// Largest memory occupancy observed after any item.
    pub max_occupancy: usize,
    /// Stream position (1-based item count) of each checkpoint.
    pub trigger_items: Vec<usize>,
}

/// Bounded first-in-first-out store of unlabeled sample indices.
#[derive(Debug, Clone)]
pub struct FifoMemory {
    cap: usize,
    items: VecDeque<usize>,
}

impl FifoMemory {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            items: VecDeque::with_capacity(cap),
        }
    }

    /// Appends `item`, evicting the oldest entry once the cap is exceeded.
    pub fn push(&mut self, item: usize) {
        self.items.push_back(item);
        if self.items.len() > self.cap {
            self.items.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Current contents, sorted ascending.
    pub fn sorted(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.items.iter().copied().collect();
        v.sort_unstable();
        v
    }
}

/// Item counts `ceil(f * n)` at which each checkpoint fires.
pub fn checkpoint_items(n: usize, fractions: &[f64]) -> Vec<usize> {
    fractions
        .iter()
        .map(|f| ((f * n as f64 - 1e-9).ceil().max(1.0) as usize).min(n))
        .collect()
}

/// Streams the target training set once in shuffled order. Feedback items join
/// an unbounded labeled store, the rest a FIFO memory of at most
/// `memory_cap` samples. At each checkpoint the model is adapted on the current
/// store and memory, starting from the source model (or the previous
/// checkpoint's model with `warm_start`).
pub fn run_stream(
    source_model: &MlpModel,
    train: &LabeledSet,
    test: &LabeledSet,
    split: &TargetSplit,
    adapt_cfg: &AdaptConfig,
    stream: &StreamConfig,
    seed: u64,
) -> Result<StreamOutcome> {
    stream.validate(&adapt_cfg.batch)?;
    adapt_cfg.validate()?;
    let n = train.len();
    if n == 0 {
        return Err(Error::Validation("empty target stream".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, "stream"));
    let feedback: HashSet<usize> = split.labeled.iter().map(|&(i, _)| i).collect();
    let triggers = checkpoint_items(n, &stream.checkpoints);

    let mut memory = FifoMemory::new(stream.memory_cap);
    let mut seen: HashSet<usize> = HashSet::new();
    let mut max_occupancy = 0;
    let mut model = source_model.clone();
    let mut checkpoints = Vec::new();
    let mut next = 0;
    for (pos, &item) in order.iter().enumerate() {
        seen.insert(item);
        if !feedback.contains(&item) {
            memory.push(item);
        }
        max_occupancy = max_occupancy.max(memory.len());
        debug_assert!(memory.len() <= stream.memory_cap);

        while next < triggers.len() && triggers[next] == pos + 1 {
            let labeled: Vec<(usize, usize)> =
                split.labeled.iter().copied().filter(|(i, _)| seen.contains(i)).collect();
            let unlabeled = memory.sorted();
            let start = if stream.warm_start { &model } else { source_model };
            let runnable = !labeled.is_empty() && (adapt_cfg.batch.mu == 0 || !unlabeled.is_empty());
            let record = if runnable {
                let current = TargetSplit {
                    labeled: labeled.clone(),
                    unlabeled: unlabeled.clone(),
                    provenance: split.provenance.clone(),
                };
                let out = adapt(start, &current, train, Some(test), adapt_cfg, seed)?;
                model = out.model;
                CheckpointRecord {
                    fraction: stream.checkpoints[next],
                    items_seen: pos + 1,
                    occupancy: memory.len(),
                    labeled: labeled.len(),
                    skipped: false,
                    test_acc: top1_accuracy(&model, test, None)?,
                    epochs: out.epochs,
                }
            } else {
                CheckpointRecord {
                    fraction: stream.checkpoints[next],
                    items_seen: pos + 1,
                    occupancy: memory.len(),
                    labeled: labeled.len(),
                    skipped: true,
                    test_acc: top1_accuracy(start, test, None)?,
                    epochs: Vec::new(),
                }
            };
            checkpoints.push(record);
            next += 1;
        }
    }
    Ok(StreamOutcome {
        checkpoints,
        max_occupancy,
        trigger_items: triggers,
    })
}
