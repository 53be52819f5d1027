//! Semi-supervised domain adaptation with biased user feedback, on synthetic
//! 2-D data.
//!
//! The crate simulates a deployed classifier that receives a handful of
//! corrected labels from its users. Users mostly correct *mistakes*, so the
//! labeled target set is negatively biased: it sits where the source model was
//! wrong rather than spreading evenly over each class. The [`rld`] module
//! counteracts that bias by retrieving confidently pseudo-labeled "defending"
//! samples of the same class and appending them to every mini-batch.
//!
//! Module map:
//!
//! - [`nn`]: MLP with exact backpropagation, cross-entropy losses, SGD.
//! - [`data`]: shifted blobs and two-moons pairs, stratified splits, CSV.
//! - [`feedback`]: random, negatively/positively biased and confident-error
//!   feedback selection.
//! - [`semisda`]: pseudo-labeling and FixMatch-style adaptation loops.
//! - [`rld`]: candidate bank, defending-sample retrieval, the extra loss term.
//! - [`eval`]: accuracy, AUROC, source-calibrated thresholds, decision grids, SVG.
//! - [`harness`]: configuration, runs, sweeps, ablations, streaming, reports.

pub mod data;
pub mod error;
pub mod eval;
pub mod feedback;
pub mod harness;
pub mod nn;
pub mod rld;
pub mod rng;
pub mod semisda;

pub use error::{Error, Result};

/// 2-D input point.
pub type Point = [f64; 2];

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/feedback.md")]
    mod feedback {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/adaptation.md")]
    mod adaptation {}
    #[doc = include_str!("../../../book/src/retrieval.md")]
    mod retrieval {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/harness.md")]
    mod harness {}
    #[doc = include_str!("../../../book/src/reproducing.md")]
    mod reproducing {}
}
