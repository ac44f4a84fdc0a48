//! Lloyd's k-means with k-means++ seeding.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{IapError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `k × dim`, row-major.
    pub centroids: Vec<f64>,
    pub inertia: f64,
    /// Inertia after every assignment step, in order.
    pub history: Vec<f64>,
}

const REL_TOL: f64 = 1e-6;

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(points: &[f64], dim: usize) -> usize {
    let mut seen = HashSet::new();
    for p in points.chunks_exact(dim) {
        let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
        seen.insert(key);
    }
    seen.len()
}

/// Clusters `points` (row-major, `dim` values each) into `k` groups.
///
/// Seeding draws from a ChaCha8 stream keyed by `seed`. Nearest-centroid
/// ties go to the lowest centroid index. A cluster that empties is moved
/// onto the point currently farthest from its centroid.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, max_iter: usize) -> Result<KMeansResult> {
    if dim == 0 || points.is_empty() {
        return Err(IapError::invalid("k-means needs at least one point"));
    }
    if !points.len().is_multiple_of(dim) {
        return Err(IapError::dims("point buffer is not a multiple of dim"));
    }
    if k == 0 {
        return Err(IapError::invalid("k must be at least 1"));
    }
    let n = points.len() / dim;
    let distinct = count_distinct(points, dim);
    if k > distinct {
        return Err(IapError::invalid(format!(
            "k = {k} exceeds the {distinct} distinct points"
        )));
    }
    let point = |i: usize| &points[i * dim..(i + 1) * dim];

    // k-means++
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(k * dim);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let mut target = rng.random::<f64>() * total;
        let mut pick = None;
        for (i, &d) in nearest.iter().enumerate() {
            if d > 0.0 {
                pick = Some(i);
                if target < d {
                    break;
                }
                target -= d;
            }
        }
        let pick = pick.expect("a point away from every centroid exists");
        centroids.extend_from_slice(point(pick));
        let newc = &centroids[c * dim..(c + 1) * dim];
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(point(i), newc));
        }
    }

    let mut assignments = vec![0usize; n];
    let mut dists = vec![0.0; n];
    let mut history = Vec::new();
    let mut iter = 0;
    loop {
        // assignment
        for i in 0..n {
            let p = point(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let d = sq_dist(p, &centroids[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            assignments[i] = best;
            dists[i] = best_d;
        }
        let inertia: f64 = dists.iter().sum();
        let converged = history
            .last()
            .is_some_and(|&prev: &f64| (prev - inertia).abs() <= REL_TOL * prev.max(f64::MIN_POSITIVE));
        history.push(inertia);
        iter += 1;
        if converged || iter >= max_iter.max(1) || inertia == 0.0 {
            break;
        }

        // update
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate().take(n) {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(point(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for j in 0..dim {
                    centroids[c * dim + j] = sums[c * dim + j] / counts[c] as f64;
                }
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // farthest point from its (updated) centroid among clusters with spare members
                let mut far = None;
                let mut far_d = -1.0;
                for (i, &a) in assignments.iter().enumerate().take(n) {
                    if counts[a] < 2 {
                        continue;
                    }
                    let d = sq_dist(point(i), &centroids[a * dim..(a + 1) * dim]);
                    if d > far_d {
                        far_d = d;
                        far = Some(i);
                    }
                }
                if let Some(i) = far {
                    counts[assignments[i]] -= 1;
                    counts[c] = 1;
                    assignments[i] = c;
                    centroids[c * dim..(c + 1) * dim].copy_from_slice(point(i));
                }
            }
        }
    }
    let inertia = *history.last().unwrap();
    Ok(KMeansResult {
        assignments,
        centroids,
        inertia,
        history,
    })
}

#[cfg(test)]
mod tests {
    use rand_distr::{Distribution, Normal};

    use super::*;

    #[test]
    fn two_points_two_clusters() {
        let r = kmeans(&[0.0, 10.0], 1, 2, 3, 50).unwrap();
        let mut c = r.centroids.clone();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        assert_eq!(r.inertia, 0.0);
        assert_ne!(r.assignments[0], r.assignments[1]);
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = [1.0, 2.0, 3.0, 6.0, 5.0, 4.0];
        let r = kmeans(&pts, 2, 1, 0, 50).unwrap();
        assert!((r.centroids[0] - 3.0).abs() < 1e-12);
        assert!((r.centroids[1] - 4.0).abs() < 1e-12);
        // total variance times N
        let want: f64 = pts.chunks(2).map(|p| (p[0] - 3.0).powi(2) + (p[1] - 4.0).powi(2)).sum();
        assert!((r.inertia - want).abs() < 1e-12);
    }

    /// Minimum-inertia 2-partition by enumeration.
    fn best_two_partition(pts: &[f64], dim: usize) -> (f64, Vec<usize>) {
        let n = pts.len() / dim;
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << n) - 1 {
            let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
            let mut cost = 0.0;
            for c in 0..2 {
                let members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                for j in 0..dim {
                    let m = members.iter().map(|&i| pts[i * dim + j]).sum::<f64>() / members.len() as f64;
                    cost += members.iter().map(|&i| (pts[i * dim + j] - m).powi(2)).sum::<f64>();
                }
            }
            if cost < best.0 {
                best = (cost, labels);
            }
        }
        best
    }

    #[test]
    fn separated_blobs_match_exhaustive_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noise = Normal::new(0.0, 0.3).unwrap();
        let mut pts = Vec::new();
        for i in 0..12 {
            let center = if i < 6 { (0.0, 0.0) } else { (5.0, 4.0) };
            pts.push(center.0 + noise.sample(&mut rng));
            pts.push(center.1 + noise.sample(&mut rng));
        }
        let (best_cost, best) = best_two_partition(&pts, 2);
        for seed in 0..5 {
            let r = kmeans(&pts, 2, 2, seed, 100).unwrap();
            assert!((r.inertia - best_cost).abs() < 1e-9);
            let same = r.assignments.iter().zip(&best).all(|(a, b)| a == b);
            let flipped = r.assignments.iter().zip(&best).all(|(a, b)| a != b);
            assert!(same || flipped);
        }
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<f64> = (0..600).map(|_| rng.random_range(0.0..1.0)).collect();
        for seed in 0..4 {
            let r = kmeans(&pts, 3, 7, seed, 100).unwrap();
            for w in r.history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", r.history);
            }
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<f64> = (0..300).map(|_| rng.random_range(0.0..1.0)).collect();
        assert_eq!(kmeans(&pts, 3, 4, 8, 50).unwrap(), kmeans(&pts, 3, 4, 8, 50).unwrap());
    }

    #[test]
    fn invalid_inputs() {
        assert!(kmeans(&[], 1, 1, 0, 10).is_err());
        assert!(kmeans(&[1.0], 1, 0, 0, 10).is_err());
        assert!(kmeans(&[1.0, 1.0, 2.0], 1, 3, 0, 10).is_err());
    }
}
