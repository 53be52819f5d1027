use std::cmp::Ordering;

use rand::seq::SliceRandom;

use super::{FeedbackPolicy, FeedbackSpec, Provenance, Shortage, ShortageFallback, TargetSplit};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::nn::{argmax, Head, MlpModel};
use crate::rng::{substream, StreamRng};

/// Source-model view of every training sample.
struct Assessment {
    predicted: Vec<usize>,
    confidence: Vec<f64>,
    entropy: Vec<f64>,
}

fn assess(train: &LabeledSet, model: &MlpModel) -> Result<Assessment> {
    if model.head() != Head::Softmax {
        return Err(Error::InvalidConfig(
            "class feedback needs a softmax model; use simulate_feedback_binary".into(),
        ));
    }
    let probs = model.probabilities(&train.inputs())?;
    let mut out = Assessment {
        predicted: Vec::with_capacity(train.len()),
        confidence: Vec::with_capacity(train.len()),
        entropy: Vec::with_capacity(train.len()),
    };
    for row in probs.iter_rows() {
        let c = argmax(row);
        out.predicted.push(c);
        out.confidence.push(row[c]);
        out.entropy.push(
            -row.iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| p * p.ln())
                .sum::<f64>(),
        );
    }
    Ok(out)
}

fn check_inputs(train: &LabeledSet, spec: &FeedbackSpec) -> Result<()> {
    spec.validate()?;
    if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::Validation(format!("training set has no samples of class {c}")));
    }
    Ok(())
}

/// Takes `want` items from `primary`, topping up from `complement` when allowed.
fn take(
    primary: &[usize],
    complement: &[usize],
    want: usize,
    group: String,
    fallback: ShortageFallback,
    shortages: &mut Vec<Shortage>,
) -> Vec<usize> {
    if primary.len() >= want {
        return primary[..want].to_vec();
    }
    shortages.push(Shortage {
        group,
        requested: want,
        available: primary.len(),
    });
    let mut out = primary.to_vec();
    if fallback == ShortageFallback::FillFromCorrect {
        let rest = (want - primary.len()).min(complement.len());
        out.extend_from_slice(&complement[..rest]);
    }
    out
}

fn finish(
    train: &LabeledSet,
    chosen: Vec<usize>,
    spec: &FeedbackSpec,
    seed: u64,
    shortages: Vec<Shortage>,
) -> Result<TargetSplit> {
    if !shortages.is_empty() && spec.fallback == ShortageFallback::Error {
        return Err(Error::Shortage(shortages));
    }
    let mut is_labeled = vec![false; train.len()];
    chosen.iter().for_each(|&i| is_labeled[i] = true);
    Ok(TargetSplit {
        labeled: chosen.iter().map(|&i| (i, train.labels[i])).collect(),
        unlabeled: (0..train.len()).filter(|&i| !is_labeled[i]).collect(),
        provenance: Provenance {
            spec: spec.clone(),
            seed,
            shortages,
        },
    })
}

fn shuffled(mut v: Vec<usize>, rng: &mut StreamRng) -> Vec<usize> {
    v.shuffle(rng);
    v
}

/// Selects `per_class_count` labeled samples per true class according to the policy.
pub fn simulate_feedback(
    train: &LabeledSet,
    source_model: &MlpModel,
    spec: &FeedbackSpec,
    seed: u64,
) -> Result<TargetSplit> {
    if spec.policy == FeedbackPolicy::ConfidentErrors {
        return simulate_feedback_nbf_ce(train, source_model, spec, seed);
    }
    check_inputs(train, spec)?;
    let a = assess(train, source_model)?;
    let mut rng = substream(seed, "feedback");
    let mut shortages = Vec::new();
    let mut chosen = Vec::new();
    let m = spec.per_class_count;
    for class in 0..train.num_classes {
        let members = train.class_indices(class);
        let (correct, wrong): (Vec<usize>, Vec<usize>) =
            members.iter().partition(|&&i| a.predicted[i] == class);
        let group = format!("class {class}");
        let picked = match spec.policy {
            FeedbackPolicy::Random => {
                let pool = shuffled(members, &mut rng);
                take(&pool, &[], m, group, spec.fallback, &mut shortages)
            }
            FeedbackPolicy::NegativelyBiased => {
                let wrong = shuffled(wrong, &mut rng);
                let correct = shuffled(correct, &mut rng);
                take(&wrong, &correct, m, group, spec.fallback, &mut shortages)
            }
            FeedbackPolicy::PositivelyBiased => {
                let correct = shuffled(correct, &mut rng);
                let wrong = shuffled(wrong, &mut rng);
                take(&correct, &wrong, m, group, spec.fallback, &mut shortages)
            }
            FeedbackPolicy::Mixed { positive, negative } => {
                let correct = shuffled(correct, &mut rng);
                let wrong = shuffled(wrong, &mut rng);
                let n_pos = positive.min(correct.len());
                let n_neg = negative.min(wrong.len());
                let mut picked: Vec<usize> = correct[..n_pos].to_vec();
                picked.extend_from_slice(&wrong[..n_neg]);
                for (part, want, have) in [("positive", positive, n_pos), ("negative", negative, n_neg)] {
                    if have < want {
                        shortages.push(Shortage {
                            group: format!("{group} {part}"),
                            requested: want,
                            available: have,
                        });
                    }
                }
                if spec.fallback == ShortageFallback::FillFromCorrect {
                    picked.extend(wrong[n_neg..].iter().take(positive - n_pos));
                    picked.extend(correct[n_pos..].iter().take(negative - n_neg));
                }
                picked
            }
            FeedbackPolicy::Entropy => {
                let mut pool = members;
                pool.sort_by(|&x, &y| desc_then_index(a.entropy[x], a.entropy[y], x, y));
                take(&pool, &[], m, group, spec.fallback, &mut shortages)
            }
            FeedbackPolicy::ConfidentErrors => unreachable!("dispatched above"),
        };
        chosen.extend(picked);
    }
    finish(train, chosen, spec, seed, shortages)
}

/// Larger score first; equal scores by ascending index.
pub(crate) fn desc_then_index(sx: f64, sy: f64, x: usize, y: usize) -> Ordering {
    sy.partial_cmp(&sx).unwrap_or(Ordering::Equal).then(x.cmp(&y))
}

/// Per true class, the misclassified samples the source model was most confident about.
pub fn simulate_feedback_nbf_ce(
    train: &LabeledSet,
    source_model: &MlpModel,
    spec: &FeedbackSpec,
    seed: u64,
) -> Result<TargetSplit> {
    check_inputs(train, spec)?;
    let a = assess(train, source_model)?;
    let mut shortages = Vec::new();
    let mut chosen = Vec::new();
    for class in 0..train.num_classes {
        let (mut correct, mut wrong): (Vec<usize>, Vec<usize>) = train
            .class_indices(class)
            .into_iter()
            .partition(|&i| a.predicted[i] == class);
        let by_conf = |x: &usize, y: &usize| desc_then_index(a.confidence[*x], a.confidence[*y], *x, *y);
        wrong.sort_by(by_conf);
        correct.sort_by(by_conf);
        chosen.extend(take(
            &wrong,
            &correct,
            spec.per_class_count,
            format!("class {class}"),
            spec.fallback,
            &mut shortages,
        ));
    }
    finish(train, chosen, spec, seed, shortages)
}
