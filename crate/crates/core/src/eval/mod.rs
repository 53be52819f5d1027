//! Metrics and decision-boundary visualisation.

mod grid;
mod metrics;
mod svg;

pub use grid::{decision_grid, DecisionGrid, GridBounds};
pub use metrics::{auroc, mean_auroc, source_thresholds, top1_accuracy, ThresholdFit};
pub use svg::{render_svg, PlotPoint, PALETTE};

#[cfg(test)]
mod tests;
