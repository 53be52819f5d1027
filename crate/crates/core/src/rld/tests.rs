use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::nn::{loss_ce, Head, Matrix, MlpModel};
use crate::Point;

/// Class 1 iff x > 0, confidence increasing with |x|.
fn sign_model() -> MlpModel {
    let w1 = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
    let w2 = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
    MlpModel::from_parameters(vec![w1, w2], vec![vec![0.0; 2], vec![0.0; 2]], Head::Softmax).unwrap()
}

fn line(xs: &[f64]) -> (Vec<Point>, Vec<usize>) {
    let pts = xs.iter().map(|&x| [x, 0.0]).collect();
    let idx = (100..100 + xs.len()).collect();
    (pts, idx)
}

#[test]
fn full_rate_keeps_everything() {
    let (pts, idx) = line(&[-3.0, -1.0, 0.5, 2.0, 4.0]);
    let bank = generate_bank(&sign_model(), &pts, &idx, 1.0, 0).unwrap();
    assert_eq!(bank.sizes(), vec![2, 3]);
    assert!(bank.class(0).iter().all(|e| e.label == 0 && e.point[0] < 0.0));
    assert_eq!(bank.class(1)[0].index, 104, "most confident first");
}

#[test]
fn forty_percent_of_ten_is_four() {
    let xs: Vec<f64> = (1..=10).map(|i| i as f64 * 0.3).collect();
    let (pts, idx) = line(&xs);
    let bank = generate_bank(&sign_model(), &pts, &idx, 0.4, 0).unwrap();
    assert_eq!(bank.class(1).len(), 4);
    let got: Vec<usize> = bank.class(1).iter().map(|e| e.index).collect();
    assert_eq!(got, vec![109, 108, 107, 106]);
    assert!(bank.class(0).is_empty());
    assert_eq!(bank.stats().pool_sizes, vec![0, 10]);
}

#[test]
fn ties_keep_lower_indices() {
    let (pts, idx) = line(&[1.0, 1.0, 1.0, 1.0, 1.0]);
    let bank = generate_bank(&sign_model(), &pts, &idx, 0.4, 0).unwrap();
    let got: Vec<usize> = bank.class(1).iter().map(|e| e.index).collect();
    assert_eq!(got, vec![100, 101]);
}

#[test]
fn invalid_rate_rejected() {
    let (pts, idx) = line(&[1.0]);
    assert!(generate_bank(&sign_model(), &pts, &idx, 0.0, 0).is_err());
    assert!(generate_bank(&sign_model(), &pts, &idx, 1.5, 0).is_err());
    assert!(RldConfig { k: 0, ..RldConfig::default() }.validate().is_err());
}

#[test]
fn singleton_class_is_repeated() {
    let (pts, idx) = line(&[-2.0, 3.0]);
    let bank = generate_bank(&sign_model(), &pts, &idx, 1.0, 5).unwrap();
    let cfg = RldConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let r = retrieve_defending(&bank, &[([0.1, 0.0], 1)], &cfg, None, 5, &mut rng).unwrap();
    assert_eq!(r.pairs.len(), 3);
    assert!(r.pairs.iter().all(|p| p.source_index == Some(101) && p.label == 1 && !p.fallback));
}

#[test]
fn class_aware_labels_match_anchors() {
    let xs: Vec<f64> = (0..40).map(|i| -5.0 + 0.25 * i as f64 + 0.01).collect();
    let (pts, idx) = line(&xs);
    let bank = generate_bank(&sign_model(), &pts, &idx, 0.4, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let labeled: Vec<(Point, usize)> = (0..16).map(|i| ([0.0, 0.0], i % 2)).collect();
    let r = retrieve_defending(&bank, &labeled, &RldConfig::default(), None, 0, &mut rng).unwrap();
    assert_eq!(r.pairs.len(), 48);
    assert!(r.pairs.iter().all(|p| p.label == p.anchor_label));
    // without replacement when the class bank is large enough
    for chunk in r.pairs.chunks(3) {
        let ids: Vec<_> = chunk.iter().map(|p| p.source_index).collect();
        assert!(ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2]);
    }
}

#[test]
fn unconditioned_keeps_entry_labels() {
    let xs: Vec<f64> = (0..20).map(|i| -5.0 + 0.5 * i as f64 + 0.01).collect();
    let (pts, idx) = line(&xs);
    let bank = generate_bank(&sign_model(), &pts, &idx, 1.0, 0).unwrap();
    let cfg = RldConfig { strategy: Strategy::UnconditionedRandom, k: 4, ..RldConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let labeled: Vec<(Point, usize)> = (0..10).map(|_| ([0.0, 0.0], 0)).collect();
    let r = retrieve_defending(&bank, &labeled, &cfg, None, 0, &mut rng).unwrap();
    assert_eq!(r.pairs.len(), 40);
    assert!(r.pairs.iter().all(|p| p.label == usize::from(p.point[0] > 0.0)));
    assert!(r.pairs.iter().any(|p| p.label != p.anchor_label));
}

#[test]
fn empty_class_fallbacks() {
    let (pts, idx) = line(&[1.0, 2.0]);
    let bank = generate_bank(&sign_model(), &pts, &idx, 1.0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let labeled = [([-1.0, 0.0], 0), ([1.0, 0.0], 1)];
    let r = retrieve_defending(&bank, &labeled, &RldConfig::default(), None, 0, &mut rng).unwrap();
    assert_eq!(r.fallbacks, 1);
    assert_eq!(r.pairs.len(), 6);
    assert!(r.pairs[..3].iter().all(|p| p.fallback && p.point == [-1.0, 0.0] && p.label == 0));

    let skip = RldConfig { empty_class_fallback: EmptyClassFallback::SkipWithFlag, ..RldConfig::default() };
    let r = retrieve_defending(&bank, &labeled, &skip, None, 0, &mut rng).unwrap();
    assert_eq!((r.fallbacks, r.pairs.len()), (1, 3));
}

#[test]
fn stale_bank_is_rejected() {
    let (pts, idx) = line(&[1.0, -1.0]);
    let bank = generate_bank(&sign_model(), &pts, &idx, 1.0, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let err = retrieve_defending(&bank, &[([1.0, 0.0], 1)], &RldConfig::default(), None, 3, &mut rng);
    assert!(matches!(err, Err(Error::StaleBank { bank_epoch: 2, current_epoch: 3 })));
}

#[test]
fn cosine_distant_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let model = MlpModel::new(&[2, 6, 5, 2], Head::Softmax, &mut rng).unwrap();
        let pts: Vec<Point> = (0..60).map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let idx: Vec<usize> = (0..60).collect();
        let full = generate_bank(&model, &pts, &idx, 1.0, 0).unwrap();
        let Some(class) = (0..2).find(|&c| full.class(c).len() >= 5) else { continue };
        // Keep exactly five candidates in that class.
        let p = 5.0 / full.class(class).len() as f64;
        let bank = generate_bank(&model, &pts, &idx, p, 0).unwrap();
        assert_eq!(bank.class(class).len(), 5);
        let anchor: Point = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let cfg = RldConfig { strategy: Strategy::CosineDistant, k: 1, ..RldConfig::default() };
        let r = retrieve_defending(&bank, &[(anchor, class)], &cfg, Some(&model), 0, &mut rng).unwrap();

        let fa = model.penultimate_features(&Matrix::from_points(&[anchor])).unwrap();
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for e in bank.class(class) {
            let fe = model.penultimate_features(&Matrix::from_points(&[e.point])).unwrap();
            let (a, b) = (fa.row(0), fe.row(0));
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            let d = if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
            };
            if d > best.0 {
                best = (d, e.index);
            }
        }
        assert_eq!(r.pairs[0].source_index, Some(best.1));
    }
}

#[test]
fn kmeans_picks_one_sample_per_cluster() {
    // Two tight groups of class-1 points.
    let mut xs = Vec::new();
    for i in 0..10 {
        xs.push(1.0 + 0.01 * i as f64);
        xs.push(8.0 + 0.01 * i as f64);
    }
    let (pts, idx) = line(&xs);
    let bank = generate_bank(&sign_model(), &pts, &idx, 1.0, 0).unwrap();
    let cfg = RldConfig { strategy: Strategy::KMeansCenter, k: 2, ..RldConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let r = retrieve_defending(&bank, &[([5.0, 0.0], 1)], &cfg, None, 0, &mut rng).unwrap();
    let mut xs: Vec<f64> = r.pairs.iter().map(|p| p.point[0]).collect();
    xs.sort_by(f64::total_cmp);
    assert!((xs[0] - 1.045).abs() < 0.01, "{xs:?}");
    assert!((xs[1] - 8.045).abs() < 0.01, "{xs:?}");
}

#[test]
fn kmeans_converges_on_separated_clusters() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<Point> = (0..60)
        .map(|i| {
            let c = if i % 2 == 0 { [0.0, 0.0] } else { [10.0, 10.0] };
            [c[0] + rng.random_range(-0.5..0.5), c[1] + rng.random_range(-0.5..0.5)]
        })
        .collect();
    let km = kmeans(&pts, 2, 20, &mut rng);
    let mut cs = km.centroids.clone();
    cs.sort_by(|a, b| a[0].total_cmp(&b[0]));
    assert!(cs[0][0].abs() < 0.3 && (cs[1][0] - 10.0).abs() < 0.3);
    assert!(km.assignment.iter().enumerate().all(|(i, &a)| a == km.assignment[i % 2]));
}

#[test]
fn rld_loss_examples() {
    let model = MlpModel::zeros(&[2, 3, 2], Head::Softmax).unwrap();
    let pair = DefendingPair { point: [1.0, 1.0], label: 1, anchor_label: 1, source_index: Some(0), fallback: false };
    let (loss, _) = rld_loss(&model, &[pair]).unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-15);
    let (loss, g) = rld_loss(&model, &[]).unwrap();
    assert_eq!(loss, 0.0);
    assert!(g.flatten().iter().all(|&v| v == 0.0));

    // A very confident, correct model gives ~0 loss.
    let w1 = Matrix::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]).unwrap();
    let w2 = Matrix::from_rows(&[[0.0, 100.0], [100.0, 0.0]]).unwrap();
    let sharp = MlpModel::from_parameters(vec![w1, w2], vec![vec![0.0; 2], vec![0.0; 2]], Head::Softmax).unwrap();
    let pairs = [
        DefendingPair { point: [2.0, 0.0], label: 1, anchor_label: 1, source_index: None, fallback: false },
        DefendingPair { point: [-2.0, 0.0], label: 0, anchor_label: 0, source_index: None, fallback: false },
    ];
    assert!(rld_loss(&sharp, &pairs).unwrap().0 < 1e-12);
}

#[test]
fn rld_loss_equals_direct_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = MlpModel::new(&[2, 8, 3], Head::Softmax, &mut rng).unwrap();
    let pairs: Vec<DefendingPair> = (0..9)
        .map(|i| DefendingPair {
            point: [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)],
            label: i % 3,
            anchor_label: i % 3,
            source_index: Some(i),
            fallback: false,
        })
        .collect();
    let (loss, grads) = rld_loss(&model, &pairs).unwrap();
    let x = Matrix::from_points(&pairs.iter().map(|p| p.point).collect::<Vec<_>>());
    let trace = model.forward(&x).unwrap();
    let lg = loss_ce(trace.probabilities(), &pairs.iter().map(|p| p.label).collect::<Vec<_>>(), None).unwrap();
    assert_eq!(loss, lg.loss);
    assert_eq!(grads, model.backward(&trace, &lg.grad).unwrap());
}

#[test]
fn bank_from_serialized_snapshot_is_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let model = MlpModel::new(&[2, 16, 16, 3], Head::Softmax, &mut rng).unwrap();
    let pts: Vec<Point> = (0..200).map(|_| [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)]).collect();
    let idx: Vec<usize> = (0..200).collect();
    let snapshot = MlpModel::from_json(&model.to_json()).unwrap();
    assert_eq!(
        generate_bank(&model, &pts, &idx, 0.4, 1).unwrap(),
        generate_bank(&snapshot, &pts, &idx, 0.4, 1).unwrap()
    );
}
