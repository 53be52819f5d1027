use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::ExperimentConfig;
use super::pipeline::{prepare, preparation_key, run_prepared, Prepared, RunRecord};
use crate::error::{Error, Result};
use crate::feedback::FeedbackPolicy;
use crate::rld::{RldConfig, Strategy};

/// One point of a sweep: axis labels and the configuration they produce.
#[derive(Debug, Clone)]
pub struct Cell {
    pub labels: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

fn value_label(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Cross product of the axes declared under `[sweep]`, in declaration order.
pub fn expand_axes(base: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut cells = vec![(BTreeMap::new(), BTreeMap::new())];
    for axis in &base.sweep.axes {
        let mut options: Vec<(String, BTreeMap<String, toml::Value>)> = axis
            .cells
            .iter()
            .map(|c| (c.label.clone(), c.set.clone()))
            .collect();
        if let Some(key) = &axis.key {
            options.extend(
                axis.values
                    .iter()
                    .map(|v| (value_label(v), BTreeMap::from([(key.clone(), v.clone())]))),
            );
        }
        if options.is_empty() {
            return Err(Error::InvalidConfig(format!("sweep axis `{}` has no cells", axis.name)));
        }
        let mut next = Vec::with_capacity(cells.len() * options.len());
        for (labels, sets) in &cells {
            for (label, set) in &options {
                let mut labels = labels.clone();
                labels.insert(axis.name.clone(), label.clone());
                let mut sets = sets.clone();
                sets.extend(set.clone());
                next.push((labels, sets));
            }
        }
        cells = next;
    }
    cells
        .into_iter()
        .map(|(labels, sets)| {
            let config = base.with_overrides(&sets).map_err(|e| {
                Error::InvalidConfig(format!("sweep cell {labels:?}: {e}"))
            })?;
            Ok(Cell { labels, config })
        })
        .collect()
}

/// Parameter studies around a base configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Defending samples per labeled sample, 1 to 4.
    K,
    /// Bank filtering rate 0.2 to 0.8.
    FilteringRate,
    /// (labeled, unlabeled, defending) batch compositions.
    BatchRatio,
    /// Retrieval strategies.
    Strategy,
    /// Share of correctly vs incorrectly predicted feedback.
    PfNfRatio,
    /// Feedback samples per class.
    FeedbackAmount,
}

impl Ablation {
    pub const ALL: [Ablation; 6] = [
        Ablation::K,
        Ablation::FilteringRate,
        Ablation::BatchRatio,
        Ablation::Strategy,
        Ablation::PfNfRatio,
        Ablation::FeedbackAmount,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::K => "k",
            Ablation::FilteringRate => "p",
            Ablation::BatchRatio => "batch_ratio",
            Ablation::Strategy => "strategy",
            Ablation::PfNfRatio => "pf_nf",
            Ablation::FeedbackAmount => "feedback_amount",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == name)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidConfig(format!("unknown ablation `{name}`; known: {}", known.join(", ")))
            })
    }
}

fn with_k(mut cfg: ExperimentConfig, k: usize) -> ExperimentConfig {
    let rld = cfg.adapt.rld.clone().unwrap_or_default();
    cfg.adapt.batch.k = k;
    if k > 0 {
        cfg.adapt.rld = Some(RldConfig { k, ..rld });
    }
    cfg
}

/// Cells of one ablation axis. Every cell except the batch-ratio baseline uses retrieval.
pub fn ablation_cells(base: &ExperimentConfig, which: Ablation) -> Result<Vec<Cell>> {
    let rld_base = with_k(base.clone(), base.adapt.rld.as_ref().map_or(3, |r| r.k));
    let cell = |label: String, config: ExperimentConfig| -> Result<Cell> {
        config.validate()?;
        Ok(Cell {
            labels: BTreeMap::from([(which.name().to_string(), label)]),
            config,
        })
    };
    match which {
        Ablation::K => (1..=4).map(|k| cell(k.to_string(), with_k(base.clone(), k))).collect(),
        Ablation::FilteringRate => [0.2, 0.4, 0.6, 0.8]
            .into_iter()
            .map(|p| {
                let mut c = rld_base.clone();
                c.adapt.rld.as_mut().expect("retrieval enabled").p = p;
                cell(p.to_string(), c)
            })
            .collect(),
        Ablation::BatchRatio => [(16, 7, 0), (16, 7, 3), (16, 4, 3)]
            .into_iter()
            .map(|(b, mu, k)| {
                let mut c = with_k(base.clone(), k);
                c.adapt.batch.labeled = b;
                c.adapt.batch.mu = mu;
                cell(format!("{}/{}/{}", b, b * mu, b * k), c)
            })
            .collect(),
        Ablation::Strategy => [
            ("class_aware_random", Strategy::ClassAwareRandom),
            ("unconditioned_random", Strategy::UnconditionedRandom),
            ("kmeans_center", Strategy::KMeansCenter),
            ("cosine_distant", Strategy::CosineDistant),
        ]
        .into_iter()
        .map(|(label, s)| {
            let mut c = rld_base.clone();
            c.adapt.rld.as_mut().expect("retrieval enabled").strategy = s;
            cell(label.to_string(), c)
        })
        .collect(),
        Ablation::PfNfRatio => {
            let n = base.feedback.per_class_count;
            [0u32, 25, 50, 75, 100]
                .into_iter()
                .map(|pf| {
                    let positive = ((f64::from(pf) / 100.0) * n as f64).round() as usize;
                    let mut c = rld_base.clone();
                    c.feedback.policy = FeedbackPolicy::Mixed {
                        positive,
                        negative: n - positive,
                    };
                    cell(format!("{pf}:{}", 100 - pf), c)
                })
                .collect()
        }
        Ablation::FeedbackAmount => [1, 3, 5, 10, 15]
            .into_iter()
            .map(|n| {
                let mut c = rld_base.clone();
                c.feedback.per_class_count = n;
                if let FeedbackPolicy::Mixed { positive, .. } = c.feedback.policy {
                    let positive = positive.min(n);
                    c.feedback.policy = FeedbackPolicy::Mixed {
                        positive,
                        negative: n - positive,
                    };
                }
                cell(n.to_string(), c)
            })
            .collect(),
    }
}

/// Applies `f` to every item on up to `threads` workers, keeping input order.
pub(crate) fn parallel_map<T: Sync, U: Send>(items: &[T], threads: usize, f: impl Fn(&T) -> U + Sync) -> Vec<U> {
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<U>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                results.lock().expect("worker panicked")[i] = Some(out);
            });
        }
    });
    results
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// Default worker count: the machine's available parallelism.
pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn failed_record(cell: &Cell, seed: u64, err: &Error) -> RunRecord {
    RunRecord {
        config_hash: cell.config.hash(),
        seed,
        cell: cell.labels.clone(),
        epochs: Vec::new(),
        final_metrics: None,
        error: Some(err.to_string()),
        wall_clock_secs: 0.0,
    }
}

/// Runs every cell for every seed. Data and source models are shared between
/// cells that only differ after pretraining. Failed runs are recorded, not fatal.
pub fn run_cells(cells: &[Cell], seeds: &[u64], threads: usize) -> Vec<RunRecord> {
    let mut prep_jobs: Vec<(String, u64, &ExperimentConfig)> = Vec::new();
    let mut seen = HashMap::new();
    for cell in cells {
        let key = preparation_key(&cell.config);
        for &seed in seeds {
            if seen.insert((key.clone(), seed), ()).is_none() {
                prep_jobs.push((key.clone(), seed, &cell.config));
            }
        }
    }
    let prepared = parallel_map(&prep_jobs, threads, |(_, seed, cfg)| prepare(cfg, *seed));
    let cache: HashMap<(String, u64), Result<Prepared>> = prep_jobs
        .iter()
        .map(|(k, s, _)| (k.clone(), *s))
        .zip(prepared)
        .collect();

    let jobs: Vec<(&Cell, u64)> = cells
        .iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    parallel_map(&jobs, threads, |&(cell, seed)| {
        let prep = &cache[&(preparation_key(&cell.config), seed)];
        let result = match prep {
            Ok(p) => run_prepared(&cell.config, p, seed),
            Err(e) => Err(Error::Validation(format!("preparation failed: {e}"))),
        };
        match result {
            Ok(out) => RunRecord {
                cell: cell.labels.clone(),
                ..out.record
            },
            Err(e) => failed_record(cell, seed, &e),
        }
    })
}
