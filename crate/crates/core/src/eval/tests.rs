use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::youden_threshold;
use super::*;
use crate::data::{Domain, LabeledSet};
use crate::nn::{Head, Matrix, MlpModel};
use crate::Error;

fn pairwise_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice_wins = 0.0;
    let (mut p, mut n) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if li == 1 {
            p += 1.0;
        } else {
            n += 1.0;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
                if scores[i] > scores[j] {
                    twice_wins += 2.0;
                } else if scores[i] == scores[j] {
                    twice_wins += 1.0;
                }
            }
        }
    }
    twice_wins / (2.0 * p * n)
}

/// 2-2-2 network whose logits reproduce the inputs (for non-negative inputs).
fn passthrough(head: Head) -> MlpModel {
    let eye = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    MlpModel::from_parameters(vec![eye.clone(), eye], vec![vec![0.0; 2]; 2], head).unwrap()
}

fn constant(class: usize) -> MlpModel {
    let mut m = MlpModel::zeros(&[2, 2, 2], Head::Softmax).unwrap();
    m.biases_mut()[1][class] = 1.0;
    m
}

fn random_set(rng: &mut ChaCha8Rng, n: usize) -> LabeledSet {
    let points: Vec<_> = (0..n)
        .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
        .collect();
    let labels: Vec<_> = (0..n).map(|_| rng.random_range(0..3)).collect();
    LabeledSet::new(points, labels, 3, Domain::Target).unwrap()
}

#[test]
fn fixed_auroc_example() {
    let s = [0.1, 0.4, 0.35, 0.8];
    let l = [0, 0, 1, 1];
    assert_eq!(auroc(&s, &l).unwrap(), 0.75);
    assert_eq!(pairwise_auroc(&s, &l), 0.75);
}

#[test]
fn auroc_edge_cases() {
    assert_eq!(auroc(&[0.1, 0.2, 0.9, 0.95], &[0, 0, 1, 1]).unwrap(), 1.0);
    assert_eq!(auroc(&[0.3; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    assert!(matches!(auroc(&[0.1, 0.2], &[1, 1]), Err(Error::UndefinedMetric(_))));
    assert!(matches!(auroc(&[0.1], &[1, 0]), Err(Error::Shape { .. })));
}

#[test]
fn rank_auroc_equals_pairwise_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let n = rng.random_range(2..=200);
        let levels = rng.random_range(2..20);
        let scores: Vec<f64> = (0..n)
            .map(|_| f64::from(rng.random_range(0..levels)) / f64::from(levels))
            .collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        assert_eq!(auroc(&scores, &labels).unwrap(), pairwise_auroc(&scores, &labels));
    }
}

proptest! {
    #[test]
    fn auroc_invariant_under_monotone_maps(
        scores in prop::collection::vec(0u8..30, 4..80),
        flips in prop::collection::vec(any::<bool>(), 80),
    ) {
        let s: Vec<f64> = scores.iter().map(|&v| f64::from(v) / 30.0).collect();
        let mut l: Vec<u8> = (0..s.len()).map(|i| u8::from(flips[i])).collect();
        l[0] = 0;
        l[1] = 1;
        let transformed: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        prop_assert_eq!(auroc(&s, &l).unwrap(), auroc(&transformed, &l).unwrap());
        let inverted: Vec<u8> = l.iter().map(|v| 1 - v).collect();
        let total = auroc(&s, &l).unwrap() + auroc(&s, &inverted).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn accuracy_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let set = random_set(&mut rng, 150);
    let model = MlpModel::new(&[2, 8, 3], Head::Softmax, &mut rng).unwrap();
    let preds = model.predict_classes(&set.inputs()).unwrap();
    let counted = preds.iter().zip(&set.labels).filter(|(a, b)| a == b).count();
    assert_eq!(top1_accuracy(&model, &set, None).unwrap(), counted as f64 / 150.0);

    let self_labeled = LabeledSet::new(set.points.clone(), preds, 3, Domain::Target).unwrap();
    assert_eq!(top1_accuracy(&model, &self_labeled, None).unwrap(), 1.0);

    let balanced = LabeledSet::new(
        vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]],
        vec![0, 1, 0, 1],
        2,
        Domain::Source,
    )
    .unwrap();
    assert_eq!(top1_accuracy(&constant(1), &balanced, None).unwrap(), 0.5);

    let empty = LabeledSet::new(vec![], vec![], 2, Domain::Source).unwrap();
    assert!(top1_accuracy(&constant(0), &empty, None).is_err());
}

#[test]
fn sigmoid_accuracy_needs_whole_vector() {
    let model = passthrough(Head::SigmoidPerOutput);
    let set = LabeledSet::new(vec![[0.0, 3.0], [3.0, 3.0], [3.0, 0.0]], vec![0, 0, 0], 2, Domain::Target)
        .unwrap()
        .with_findings(vec![vec![0, 1], vec![1, 1], vec![1, 1]])
        .unwrap();
    assert_eq!(top1_accuracy(&model, &set, Some(&[0.6, 0.6])).unwrap(), 2.0 / 3.0);
    assert!(top1_accuracy(&model, &set, None).is_err());
}

fn brute_youden(scores: &[f64], labels: &[u8]) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    let mut cands = vec![s[0] - 1.0];
    for i in 0..s.len() - 1 {
        cands.push((s[i] + s[i + 1]) / 2.0);
    }
    cands.push(s[s.len() - 1] + 1.0);
    let p = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n = labels.len() as f64 - p;
    let j = |t: f64| {
        let mut tp = 0.0;
        let mut tn = 0.0;
        for (s, l) in scores.iter().zip(labels) {
            if *l == 1 && *s >= t {
                tp += 1.0;
            }
            if *l == 0 && *s < t {
                tn += 1.0;
            }
        }
        tp / p + tn / n - 1.0
    };
    let best = cands.iter().map(|&t| j(t)).fold(f64::NEG_INFINITY, f64::max);
    cands.into_iter().find(|&t| j(t) == best).unwrap()
}

#[test]
fn youden_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(2..25);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..10)) / 10.0).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        assert_eq!(youden_threshold(&scores, &labels).unwrap(), brute_youden(&scores, &labels));
    }
}

#[test]
fn separated_scores_pick_gap_midpoint() {
    let t = youden_threshold(&[0.1, 0.2, 0.7, 0.9], &[0, 0, 1, 1]).unwrap();
    assert!((t - 0.45).abs() < 1e-15);
}

#[test]
fn single_class_column_defaults() {
    let model = passthrough(Head::SigmoidPerOutput);
    let set = LabeledSet::new(vec![[0.0, 0.0], [2.0, 1.0], [4.0, 2.0]], vec![0, 0, 0], 2, Domain::Source)
        .unwrap()
        .with_findings(vec![vec![0, 1], vec![1, 1], vec![1, 1]])
        .unwrap();
    let fit = source_thresholds(&model, &set).unwrap();
    assert_eq!(fit.defaulted, vec![false, true]);
    assert_eq!(fit.thresholds[1], 0.5);
    assert!(fit.thresholds[0] > 0.5 && fit.thresholds[0] < 2.0_f64.exp() / (1.0 + 2.0_f64.exp()));
    assert!(source_thresholds(&constant(0), &set).is_err());
}

#[test]
fn grid_examples() {
    let bounds = GridBounds { xmin: -1.0, xmax: 1.0, ymin: -1.0, ymax: 1.0 };
    let g = decision_grid(&constant(1), bounds, 7, None).unwrap();
    assert_eq!(g.cells.len(), 49);
    assert!(g.cells.iter().all(|&c| c == 1));

    let g2 = decision_grid(&constant(0), bounds, 2, None).unwrap();
    assert_eq!(g2.cell_center(0, 0), [-0.5, -0.5]);
    assert_eq!(g2.cell_center(1, 1), [0.5, 0.5]);

    let bad = GridBounds { xmin: 1.0, xmax: -1.0, ymin: -1.0, ymax: 1.0 };
    assert!(matches!(decision_grid(&constant(0), bad, 4, None), Err(Error::Validation(_))));
    assert!(decision_grid(&constant(0), bounds, 1, None).is_err());
}

#[test]
fn grid_agrees_with_pointwise_predictions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let model = MlpModel::new(&[2, 16, 3], Head::Softmax, &mut rng).unwrap();
    let bounds = GridBounds { xmin: -3.0, xmax: 2.0, ymin: -1.0, ymax: 4.0 };
    let g = decision_grid(&model, bounds, 13, None).unwrap();
    for j in 0..13 {
        for i in 0..13 {
            let c = g.cell_center(i, j);
            let direct = model.predict_classes(&Matrix::from_points(&[c])).unwrap()[0];
            assert_eq!(g.cell(i, j), direct);
        }
    }
}

#[test]
fn grid_csv_and_svg() {
    let bounds = GridBounds { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 };
    let g = decision_grid(&constant(1), bounds, 3, None).unwrap();
    let mut buf = Vec::new();
    g.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), "1,1,1\n1,1,1\n1,1,1\n");

    let pts = [
        PlotPoint { point: [0.2, 0.2], class: 0, highlighted: false },
        PlotPoint { point: [0.8, 0.8], class: 1, highlighted: true },
    ];
    let svg = render_svg(&g, &pts, "a < b");
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains(r#"viewBox="0 0 800 800""#));
    assert_eq!(svg.matches("<circle").count(), 2);
    assert!(svg.contains("stroke=\"black\""));
    assert!(svg.contains("a &lt; b"));
    assert!(!svg.contains("href"));
    // Background plus one merged run per row.
    assert_eq!(svg.matches("<rect").count(), 1 + 3);
}

#[test]
fn svg_runs_tile_each_row() {
    let g = DecisionGrid {
        bounds: GridBounds { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 },
        resolution: 3,
        cells: vec![0, 0, 1, 1, 1, 1, 0, 1, 0],
    };
    let svg = render_svg(&g, &[], "");
    let rects: Vec<(f64, f64, f64)> = svg
        .lines()
        .filter(|l| l.starts_with("<rect x="))
        .map(|l| {
            let attr = |name: &str| -> f64 {
                let start = l.find(&format!("{name}=\"")).unwrap() + name.len() + 2;
                l[start..].split('"').next().unwrap().parse().unwrap()
            };
            (attr("x"), attr("y"), attr("width"))
        })
        .collect();
    assert_eq!(rects.len(), 2 + 1 + 3);
    for row_y in [533.33, 266.67, 0.0] {
        let width: f64 = rects.iter().filter(|r| (r.1 - row_y).abs() < 0.01).map(|r| r.2 - 0.01).sum();
        assert!((width - 800.0).abs() < 0.05, "row at y={row_y} covers {width}");
    }
}
