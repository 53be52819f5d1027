use rand::seq::SliceRandom;

use super::LabeledSet;
use crate::error::{Error, Result};
use crate::rng::substream;

/// A split part and the original index of each of its rows.
pub type IndexedPart = (LabeledSet, Vec<usize>);

/// Stratified split: per class, `round(ratio * n_c)` samples go to train.
///
/// Returns the two sets together with the original indices each row came from.
pub fn split_train_test(
    set: &LabeledSet,
    ratio: f64,
    seed: u64,
) -> Result<(IndexedPart, IndexedPart)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut rng = substream(seed, "split");
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..set.num_classes {
        let mut idx = set.class_indices(class);
        if idx.len() < 2 {
            return Err(Error::Validation(format!(
                "class {class} has {} samples; a split needs at least 2",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        let n_train = (ratio * idx.len() as f64).round() as usize;
        test_idx.extend_from_slice(&idx[n_train..]);
        train_idx.extend_from_slice(&idx[..n_train]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((
        (set.subset(&train_idx), train_idx),
        (set.subset(&test_idx), test_idx),
    ))
}
