use super::config::ExperimentConfig;
use super::pipeline::{adapt_split, make_split, FeedbackSplit, Prepared};
use crate::error::Result;
use crate::eval::{decision_grid, render_svg, GridBounds, PlotPoint};
use crate::nn::MlpModel;

/// Cells per axis of the decision-boundary heatmaps.
pub const PLOT_RESOLUTION: usize = 120;

/// One rendered panel.
#[derive(Debug, Clone)]
pub struct Panel {
    pub name: &'static str,
    pub svg: String,
}

fn panel(
    name: &'static str,
    title: String,
    model: &MlpModel,
    prepared: &Prepared,
    highlighted: &[usize],
    bounds: GridBounds,
) -> Result<Panel> {
    let grid = decision_grid(model, bounds, PLOT_RESOLUTION, prepared.threshold_values())?;
    let train = &prepared.domains.target_train;
    let class_of = |i: usize| match &train.findings {
        Some(f) => f[i].iter().enumerate().map(|(b, &v)| usize::from(v) << b).sum(),
        None => train.labels[i],
    };
    let points: Vec<PlotPoint> = (0..train.len())
        .map(|i| PlotPoint {
            point: train.points[i],
            class: class_of(i),
            highlighted: highlighted.contains(&i),
        })
        .collect();
    Ok(Panel {
        name,
        svg: render_svg(&grid, &points, &title),
    })
}

/// Source model, baseline-adapted and retrieval-adapted decision boundaries on
/// the target training data, with the feedback samples circled.
pub fn decision_panels(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Result<Vec<Panel>> {
    let split = make_split(cfg, prepared, seed)?;
    let highlighted: Vec<usize> = match &split {
        FeedbackSplit::Multiclass(s) => s.labeled_indices(),
        FeedbackSplit::Binary(s) => s.findings.iter().flat_map(|f| f.labeled.iter().map(|l| l.0)).collect(),
    };
    let d = &prepared.domains;
    let all: Vec<_> = d.source_train.points.iter().chain(&d.target_train.points).copied().collect();
    let bounds = GridBounds::around(&all, 0.5);

    let mut baseline = cfg.adapt.clone();
    baseline.batch.k = 0;
    let rld_cfg = baseline.clone().with_rld(cfg.adapt.rld.clone().unwrap_or_default());
    let base_out = adapt_split(prepared, &split, &baseline, seed)?;
    let rld_out = adapt_split(prepared, &split, &rld_cfg, seed)?;
    let acc = |o: &crate::semisda::AdaptOutcome| o.epochs.last().and_then(|e| e.test_acc).unwrap_or(f64::NAN);

    Ok(vec![
        panel(
            "source",
            format!("source model: {:.1}%", 100.0 * prepared.target_acc),
            &prepared.model,
            prepared,
            &highlighted,
            bounds,
        )?,
        panel(
            "baseline",
            format!("baseline: {:.1}%", 100.0 * acc(&base_out)),
            &base_out.model,
            prepared,
            &highlighted,
            bounds,
        )?,
        panel(
            "rld",
            format!("with defending samples: {:.1}%", 100.0 * acc(&rld_out)),
            &rld_out.model,
            prepared,
            &highlighted,
            bounds,
        )?,
    ])
}
