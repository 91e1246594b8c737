//! kmeans++ clustering over sparse feature vectors with Euclidean distance.
//!
//! Centroids are dense mean vectors; point-to-centroid distance is computed
//! as `||x||^2 - 2<x,c> + ||c||^2` with cached centroid norms. All steps
//! reduce in fixed row order, so a fit is deterministic given its seed.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-4;

/// A fitted clustering: centroids, per-row assignment, and the final
/// within-cluster sum of squared distances.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    pub within_cluster_sse: f64,
    /// SSE after each assignment pass, non-increasing.
    pub sse_history: Vec<f64>,
    pub dim: usize,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    /// Fixture dump: k, dimension, SSE, then per-centroid nonzero entries.
    pub fn dump(&self) -> String {
        let mut out = format!("k {}\ndim {}\nsse {}\n", self.k(), self.dim, self.within_cluster_sse);
        for (c, centroid) in self.centroids.iter().enumerate() {
            out.push_str(&format!("centroid {c}"));
            for (i, &v) in centroid.iter().enumerate() {
                if v != 0.0 {
                    out.push_str(&format!(" {i}:{v}"));
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.dump())?;
        Ok(())
    }
}

fn squared_distance(x: &FeatureVector, centroid: &[f64], centroid_sq_norm: f64) -> f64 {
    let d2 = x.squared_norm() - 2.0 * x.dot_dense(centroid) + centroid_sq_norm;
    d2.max(0.0)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn count_distinct_rows(x: &FeatureMatrix) -> usize {
    use std::collections::HashSet;
    let mut seen: HashSet<Vec<(usize, u64)>> = HashSet::new();
    for row in &x.rows {
        let key: Vec<(usize, u64)> = row.entries().iter().map(|&(i, w)| (i, w.to_bits())).collect();
        seen.insert(key);
    }
    seen.len()
}

/// kmeans++ seeding: first centroid uniform over rows, each subsequent
/// centroid drawn with probability proportional to the squared distance to
/// the nearest centroid chosen so far.
pub fn kmeanspp_seed(x: &FeatureMatrix, k: usize, rng_seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = x.n_rows();
    let distinct = count_distinct_rows(x);
    if k == 0 || distinct < k {
        return Err(Error::KExceedsDistinctPoints { k, distinct });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centroids.push(x.rows[first].to_dense());

    // d2[i] = squared distance from row i to its nearest chosen centroid.
    let mut d2: Vec<f64> = {
        let c = &centroids[0];
        let cn = sq_norm(c);
        x.rows.iter().map(|r| squared_distance(r, c, cn)).collect()
    };
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        debug_assert!(total > 0.0, "distinct-row precheck guarantees mass remains");
        let target = rng.gen::<f64>() * total;
        let mut cumulative = 0.0;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            cumulative += w;
            if cumulative > target {
                chosen = Some(i);
                break;
            }
        }
        // Floating-point underrun at the far end: take the last positive weight.
        let idx = chosen.unwrap_or_else(|| {
            d2.iter().rposition(|&w| w > 0.0).expect("positive mass present")
        });
        let c = x.rows[idx].to_dense();
        let cn = sq_norm(&c);
        for (i, row) in x.rows.iter().enumerate() {
            let d = squared_distance(row, &c, cn);
            if d < d2[i] {
                d2[i] = d;
            }
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// One assignment pass: nearest centroid per row (ties to the lowest
/// cluster id). Returns (assignment, per-row squared distance, SSE).
fn assign(x: &FeatureMatrix, centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>, f64) {
    let norms: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
    let mut assignment = Vec::with_capacity(x.n_rows());
    let mut dists = Vec::with_capacity(x.n_rows());
    let mut sse = 0.0;
    for row in &x.rows {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = squared_distance(row, centroid, norms[c]);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignment.push(best);
        dists.push(best_d);
        sse += best_d;
    }
    (assignment, dists, sse)
}

/// Lloyd iterations from a kmeans++ seeding until the maximum centroid
/// displacement drops below `tol` or `max_iter` update rounds have run.
/// An empty cluster is repaired by reseeding its centroid to the point
/// farthest from its currently assigned centroid.
pub fn kmeans_fit(
    x: &FeatureMatrix,
    k: usize,
    rng_seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    let mut centroids = kmeanspp_seed(x, k, rng_seed)?;
    let dim = x.dim;
    let (mut assignment, mut dists, mut sse) = assign(x, &centroids);
    let mut history = vec![sse];

    for _ in 0..max_iter {
        // Mean update.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, row) in x.rows.iter().enumerate() {
            let c = assignment[i];
            counts[c] += 1;
            for &(j, w) in row.entries() {
                sums[c][j] += w;
            }
        }
        let mut new_centroids = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                let mut mean = sums[c].clone();
                for v in &mut mean {
                    *v *= inv;
                }
                new_centroids.push(mean);
            } else {
                // Farthest point from its assigned centroid takes over the
                // empty cluster; its distance is zeroed so a second empty
                // cluster picks a different point.
                let far = dists
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(i, _)| i)
                    .expect("nonempty matrix");
                dists[far] = 0.0;
                assignment[far] = c;
                new_centroids.push(x.rows[far].to_dense());
            }
        }
        let displacement = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(old, new)| {
                old.iter()
                    .zip(new)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0_f64, f64::max);
        centroids = new_centroids;
        let (a, d, s) = assign(x, &centroids);
        assignment = a;
        dists = d;
        sse = s;
        history.push(sse);
        if displacement < tol {
            break;
        }
    }

    Ok(ClusterModel {
        centroids,
        assignment,
        within_cluster_sse: sse,
        sse_history: history,
        dim,
    })
}

/// Nearest centroid for one vector: (cluster id, Euclidean distance), ties
/// to the lowest cluster id.
pub fn distance_to_centroid(x: &FeatureVector, model: &ClusterModel) -> Result<(usize, f64)> {
    if x.dim() != model.dim {
        return Err(Error::DimensionMismatch {
            expected: model.dim,
            got: x.dim(),
        });
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in model.centroids.iter().enumerate() {
        let d = squared_distance(x, centroid, sq_norm(centroid));
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    Ok((best, best_d.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::DocId;

    fn matrix(points: &[&[f64]]) -> FeatureMatrix {
        let dim = points[0].len();
        let rows: Vec<FeatureVector> = points
            .iter()
            .map(|p| {
                FeatureVector::new(
                    p.iter().enumerate().map(|(i, &v)| (i, v)).collect(),
                    dim,
                )
            })
            .collect();
        let row_ids: Vec<DocId> = (0..rows.len() as u64).collect();
        FeatureMatrix { rows, row_ids, dim }
    }

    #[test]
    fn seed_two_distinct_points_picks_both() {
        let x = matrix(&[&[0.0, 0.0], &[1.0, 1.0]]);
        for seed in 0..5 {
            let mut seeds = kmeanspp_seed(&x, 2, seed).unwrap();
            seeds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(seeds, vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        }
    }

    #[test]
    fn seed_k1_is_a_row() {
        let x = matrix(&[&[0.0], &[2.0], &[5.0]]);
        let seeds = kmeanspp_seed(&x, 1, 3).unwrap();
        assert_eq!(seeds.len(), 1);
        assert!([0.0, 2.0, 5.0].contains(&seeds[0][0]));
    }

    #[test]
    fn seed_rejects_k_above_distinct_rows() {
        let x = matrix(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            kmeanspp_seed(&x, 2, 0),
            Err(Error::KExceedsDistinctPoints { k: 2, distinct: 1 })
        ));
    }

    #[test]
    fn fit_recovers_two_line_clusters() {
        // Exhaustive enumeration of 2-partitions puts {(0,0),(0.2,0)} and
        // {(10,0),(10.2,0)} together: SSE = 4 * 0.1^2 = 0.04.
        let x = matrix(&[&[0.0, 0.0], &[0.2, 0.0], &[10.0, 0.0], &[10.2, 0.0]]);
        let model = kmeans_fit(&x, 2, 11, 100, 1e-9).unwrap();
        let mut centroids = model.centroids.clone();
        centroids.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((centroids[0][0] - 0.1).abs() < 1e-12);
        assert!((centroids[1][0] - 10.1).abs() < 1e-12);
        assert!((model.within_cluster_sse - 0.04).abs() < 1e-9);
        assert_eq!(model.assignment[0], model.assignment[1]);
        assert_eq!(model.assignment[2], model.assignment[3]);
        assert_ne!(model.assignment[0], model.assignment[2]);
    }

    #[test]
    fn fit_with_k_equal_distinct_points_has_zero_sse() {
        let x = matrix(&[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 4.0]]);
        let model = kmeans_fit(&x, 3, 5, 100, 1e-6).unwrap();
        assert!(model.within_cluster_sse < 1e-12);
    }

    #[test]
    fn fit_is_deterministic() {
        let x = matrix(&[&[0.0, 1.0], &[0.1, 0.9], &[5.0, 5.0], &[5.1, 4.9], &[9.0, 0.0]]);
        let a = kmeans_fit(&x, 2, 42, 100, 1e-4).unwrap();
        let b = kmeans_fit(&x, 2, 42, 100, 1e-4).unwrap();
        assert_eq!(a.centroids, b.centroids);
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.within_cluster_sse.to_bits(), b.within_cluster_sse.to_bits());
    }

    #[test]
    fn sse_history_is_non_increasing() {
        let x = matrix(&[
            &[0.0, 0.0], &[1.0, 0.2], &[0.3, 0.8], &[4.0, 4.0], &[4.5, 3.9],
            &[8.0, 1.0], &[7.5, 0.5], &[0.9, 0.1],
        ]);
        for seed in 0..6 {
            let model = kmeans_fit(&x, 3, seed, 100, 1e-9).unwrap();
            for pair in model.sse_history.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-12, "history {:?}", model.sse_history);
            }
        }
    }

    #[test]
    fn assignment_is_nearest_centroid() {
        let x = matrix(&[
            &[0.0, 0.0], &[1.0, 0.2], &[0.3, 0.8], &[4.0, 4.0], &[4.5, 3.9], &[8.0, 1.0],
        ]);
        let model = kmeans_fit(&x, 3, 1, 100, 1e-9).unwrap();
        for (i, row) in x.rows.iter().enumerate() {
            let (nearest, _) = distance_to_centroid(row, &model).unwrap();
            assert_eq!(model.assignment[i], nearest);
        }
        let sse: f64 = x
            .rows
            .iter()
            .map(|r| distance_to_centroid(r, &model).unwrap().1.powi(2))
            .sum();
        assert!((sse - model.within_cluster_sse).abs() <= 1e-6 * sse.max(1e-12));
    }

    #[test]
    fn distance_to_centroid_cases() {
        let x = matrix(&[&[0.0, 0.0], &[10.0, 0.0]]);
        let model = kmeans_fit(&x, 2, 0, 10, 1e-6).unwrap();
        // A point equal to a centroid has distance 0.
        let (_, d) = distance_to_centroid(&x.rows[0], &model).unwrap();
        assert!(d < 1e-12);
        // (1, 0) is 1.0 from the (0,0) centroid.
        let probe = FeatureVector::new(vec![(0, 1.0)], 2);
        let zero_cluster = model
            .centroids
            .iter()
            .position(|c| c[0] == 0.0)
            .unwrap();
        let (c, d) = distance_to_centroid(&probe, &model).unwrap();
        assert_eq!(c, zero_cluster);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_tie_prefers_lowest_cluster_id() {
        let x = matrix(&[&[0.0], &[2.0]]);
        let model = kmeans_fit(&x, 2, 0, 10, 1e-6).unwrap();
        let probe = FeatureVector::new(vec![(0, 1.0)], 1);
        let (c, d) = distance_to_centroid(&probe, &model).unwrap();
        assert_eq!(c, 0);
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_rejects_dimension_mismatch() {
        let x = matrix(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let model = kmeans_fit(&x, 2, 0, 10, 1e-6).unwrap();
        let probe = FeatureVector::new(vec![(0, 1.0)], 3);
        assert!(distance_to_centroid(&probe, &model).is_err());
    }

    #[test]
    fn dump_lists_nonzero_centroid_entries() {
        let x = matrix(&[&[0.0, 2.0], &[0.0, 4.0]]);
        let model = kmeans_fit(&x, 1, 0, 10, 1e-6).unwrap();
        let dump = model.dump();
        assert!(dump.starts_with("k 1\ndim 2\n"));
        assert!(dump.contains("centroid 0 1:3"), "{dump}");
    }
}
