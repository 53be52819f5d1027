//! Lloyd's k-means on 2-D points with Forgy initialisation.

use rand::seq::index::sample;
use rand::Rng;

use crate::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Point>,
    /// Centroid index per input point.
    pub assignment: Vec<usize>,
}

fn dist2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: Point, centroids: &[Point]) -> usize {
    let mut best = 0;
    for (j, &c) in centroids.iter().enumerate().skip(1) {
        if dist2(p, c) < dist2(p, centroids[best]) {
            best = j;
        }
    }
    best
}

/// Runs exactly `iterations` Lloyd steps. `clusters` is clamped to the number
/// of points; an empty cluster keeps its previous centroid.
pub fn kmeans<R: Rng + ?Sized>(points: &[Point], clusters: usize, iterations: usize, rng: &mut R) -> KMeansResult {
    let k = clusters.min(points.len());
    if k == 0 {
        return KMeansResult {
            centroids: Vec::new(),
            assignment: vec![0; points.len()],
        };
    }
    let mut init: Vec<usize> = sample(rng, points.len(), k).into_vec();
    init.sort_unstable();
    let mut centroids: Vec<Point> = init.iter().map(|&i| points[i]).collect();
    let mut assignment = vec![0; points.len()];
    for _ in 0..iterations {
        for (a, &p) in assignment.iter_mut().zip(points) {
            *a = nearest(p, &centroids);
        }
        let mut sums = vec![[0.0, 0.0]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignment.iter().zip(points) {
            sums[a][0] += p[0];
            sums[a][1] += p[1];
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centroids[j] = [sums[j][0] / counts[j] as f64, sums[j][1] / counts[j] as f64];
            }
        }
    }
    for (a, &p) in assignment.iter_mut().zip(points) {
        *a = nearest(p, &centroids);
    }
    KMeansResult {
        centroids,
        assignment,
    }
}
