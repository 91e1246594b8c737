//! Acquisition strategies: random baseline, least-confidence and binary
//! entropy uncertainty with mean/mode aggregation, kmeans++ cluster
//! selection, the two-stage hybrid, and the weighted uncertainty metric.
//!
//! All scores share one orientation — higher means more uncertain — so
//! every selector maximizes. Raw least confidence `|0.5 - p|` points the
//! other way; [`lc_uncertainty`] flips it without changing the ranking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clustering::{distance_to_centroid, ClusterModel};
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::models::{predict_proba, TrainedModel};
use crate::DocId;

/// Uncertainty measure of Eq. 1 (least confidence) or Eq. 2 (entropy).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    LeastConfidence,
    Entropy,
}

/// How per-label uncertainty scores combine into one instance score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Mean,
    Mode,
}

/// Instance pick rule inside a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterPick {
    Random,
    Center,
    Border,
}

/// Number of clusters used by the two-stage and weighted hybrids, whose
/// strategy names carry no cluster count.
pub const HYBRID_CLUSTER_K: usize = 10;

/// Stage-1 sample size per cluster for the two-stage method.
pub const TS_CANDIDATES_PER_CLUSTER: usize = 50;

/// A fully resolved acquisition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Random,
    Uncertainty { measure: Measure, aggregation: Aggregation },
    Cluster { k: usize, pick: ClusterPick },
    TwoStage { measure: Measure, aggregation: Aggregation, k: usize, m_per_cluster: usize },
    Wum { measure: Measure, aggregation: Aggregation, k: usize },
}

impl Strategy {
    /// Number of clusters this strategy needs, if any.
    pub fn cluster_k(&self) -> Option<usize> {
        match self {
            Strategy::Random | Strategy::Uncertainty { .. } => None,
            Strategy::Cluster { k, .. } => Some(*k),
            Strategy::TwoStage { k, .. } => Some(*k),
            Strategy::Wum { k, .. } => Some(*k),
        }
    }

    pub fn needs_model(&self) -> bool {
        !matches!(self, Strategy::Random | Strategy::Cluster { .. })
    }

    /// Canonical configuration string, e.g. `lc_mean_ts` or `kmeans_r10`.
    pub fn name(&self) -> String {
        fn mm(measure: Measure, aggregation: Aggregation) -> String {
            let m = match measure {
                Measure::Entropy => "be",
                Measure::LeastConfidence => "lc",
            };
            let a = match aggregation {
                Aggregation::Mean => "mean",
                Aggregation::Mode => "mode",
            };
            format!("{m}_{a}")
        }
        match self {
            Strategy::Random => "random".to_string(),
            Strategy::Uncertainty { measure, aggregation } => mm(*measure, *aggregation),
            Strategy::TwoStage { measure, aggregation, .. } => {
                format!("{}_ts", mm(*measure, *aggregation))
            }
            Strategy::Wum { measure, aggregation, .. } => {
                format!("{}_w", mm(*measure, *aggregation))
            }
            Strategy::Cluster { k, pick } => {
                let p = match pick {
                    ClusterPick::Random => "r",
                    ClusterPick::Center => "c",
                    ClusterPick::Border => "b",
                };
                format!("kmeans_{p}{k}")
            }
        }
    }

    /// Parses a configuration string. The accepted names are exactly
    /// [`strategy_names`].
    pub fn parse(name: &str) -> Result<Strategy> {
        for strategy in all_strategies() {
            if strategy.name() == name {
                return Ok(strategy);
            }
        }
        Err(Error::UnknownStrategy { name: name.to_string() })
    }
}

/// Every configurable strategy, in reporting order.
pub fn all_strategies() -> Vec<Strategy> {
    let mut list = vec![Strategy::Random];
    let measures = [Measure::Entropy, Measure::LeastConfidence];
    let aggregations = [Aggregation::Mean, Aggregation::Mode];
    for measure in measures {
        for aggregation in aggregations {
            list.push(Strategy::Uncertainty { measure, aggregation });
        }
    }
    for measure in measures {
        for aggregation in aggregations {
            list.push(Strategy::TwoStage {
                measure,
                aggregation,
                k: HYBRID_CLUSTER_K,
                m_per_cluster: TS_CANDIDATES_PER_CLUSTER,
            });
        }
    }
    for measure in measures {
        for aggregation in aggregations {
            list.push(Strategy::Wum { measure, aggregation, k: HYBRID_CLUSTER_K });
        }
    }
    for pick in [ClusterPick::Random, ClusterPick::Center, ClusterPick::Border] {
        for k in [2, 5, 10] {
            list.push(Strategy::Cluster { k, pick });
        }
    }
    list
}

/// The accepted strategy configuration strings.
pub fn strategy_names() -> Vec<String> {
    all_strategies().iter().map(|s| s.name()).collect()
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(Error::ProbabilityOutOfRange { p });
    }
    Ok(())
}

/// Raw least confidence `|0.5 - p|`: closer to 0 means more uncertain.
pub fn lc_raw(p: f64) -> Result<f64> {
    check_probability(p)?;
    Ok((0.5 - p).abs())
}

/// Least confidence flipped to the shared orientation: `0.5 - |0.5 - p|`,
/// in [0, 0.5], maximal at p = 0.5. The argmax over instances equals the
/// argmin of [`lc_raw`].
pub fn lc_uncertainty(p: f64) -> Result<f64> {
    Ok(0.5 - lc_raw(p)?)
}

/// Binary entropy `-p log2 p - (1-p) log2 (1-p)` with p clamped to
/// `[1e-12, 1 - 1e-12]` before the logs. In [0, 1], maximal at p = 0.5.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability(p)?;
    let p = p.clamp(1e-12, 1.0 - 1e-12);
    let q = 1.0 - p;
    Ok(-p * p.log2() - q * q.log2())
}

pub fn uncertainty(p: f64, measure: Measure) -> Result<f64> {
    match measure {
        Measure::LeastConfidence => lc_uncertainty(p),
        Measure::Entropy => binary_entropy(p),
    }
}

/// Combines per-label scores: arithmetic mean, or the most frequent
/// 2-decimal bin (ties toward the higher, more uncertain bin) with the bin
/// center as the representative value.
pub fn aggregate(per_label_scores: &[f64], aggregation: Aggregation) -> Result<f64> {
    if per_label_scores.is_empty() {
        return Err(Error::EmptyAggregation);
    }
    match aggregation {
        Aggregation::Mean => {
            Ok(per_label_scores.iter().sum::<f64>() / per_label_scores.len() as f64)
        }
        Aggregation::Mode => {
            let mut bins: Vec<i64> = per_label_scores
                .iter()
                .map(|s| (s * 100.0).round() as i64)
                .collect();
            bins.sort_unstable();
            let mut best_bin = bins[0];
            let mut best_count = 0;
            let mut i = 0;
            while i < bins.len() {
                let mut j = i;
                while j < bins.len() && bins[j] == bins[i] {
                    j += 1;
                }
                let count = j - i;
                // >= prefers the higher bin on ties (bins are ascending).
                if count >= best_count {
                    best_count = count;
                    best_bin = bins[i];
                }
                i = j;
            }
            Ok(best_bin as f64 / 100.0)
        }
    }
}

/// Aggregated uncertainty of one instance under a trained model.
pub fn instance_uncertainty(
    model: &TrainedModel,
    x: &FeatureVector,
    measure: Measure,
    aggregation: Aggregation,
) -> Result<f64> {
    let probs = predict_proba(model, x)?;
    let scores: Result<Vec<f64>> = probs.iter().map(|&p| uncertainty(p, measure)).collect();
    aggregate(&scores?, aggregation)
}

fn check_batch(batch: usize, pool: usize) -> Result<()> {
    if batch > pool {
        return Err(Error::BatchExceedsPool { batch, pool });
    }
    Ok(())
}

/// Ranks ids by (score descending, id ascending) and returns the first
/// `batch` in that order.
fn top_by_score(mut scored: Vec<(DocId, f64)>, batch: usize) -> Vec<DocId> {
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.into_iter().take(batch).map(|(id, _)| id).collect()
}

/// Uniform draw without replacement, deterministic per seed.
pub fn select_random(pool_ids: &[DocId], batch: usize, rng_seed: u64) -> Result<Vec<DocId>> {
    check_batch(batch, pool_ids.len())?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut ids = pool_ids.to_vec();
    let (picked, _) = ids.partial_shuffle(&mut rng, batch);
    Ok(picked.to_vec())
}

/// Highest aggregated uncertainty first, ties to the lowest id.
pub fn select_uncertainty(
    model: &TrainedModel,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
    batch: usize,
    measure: Measure,
    aggregation: Aggregation,
) -> Result<Vec<DocId>> {
    check_batch(batch, pool_ids.len())?;
    let mut scored = Vec::with_capacity(pool_ids.len());
    for (&id, row) in pool_ids.iter().zip(rows) {
        scored.push((id, instance_uncertainty(model, row, measure, aggregation)?));
    }
    Ok(top_by_score(scored, batch))
}

/// Pool membership grouped by nearest centroid: per cluster, member
/// (id, distance) pairs in ascending id order.
fn group_by_cluster(
    cluster_model: &ClusterModel,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
) -> Result<Vec<Vec<(DocId, f64)>>> {
    let mut clusters: Vec<Vec<(DocId, f64)>> = vec![Vec::new(); cluster_model.k()];
    let mut order: Vec<usize> = (0..pool_ids.len()).collect();
    order.sort_by_key(|&i| pool_ids[i]);
    for i in order {
        let (c, d) = distance_to_centroid(rows[i], cluster_model)?;
        clusters[c].push((pool_ids[i], d));
    }
    Ok(clusters)
}

/// Round-robin batch allocation over clusters ordered by descending
/// membership, with the per-cluster pick rule applied inside each cluster.
pub fn select_cluster(
    cluster_model: &ClusterModel,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
    batch: usize,
    pick: ClusterPick,
    rng_seed: u64,
) -> Result<Vec<DocId>> {
    check_batch(batch, pool_ids.len())?;
    if batch == 0 {
        return Ok(Vec::new());
    }
    let clusters = group_by_cluster(cluster_model, rows, pool_ids)?;
    if clusters.iter().all(|c| c.is_empty()) {
        return Err(Error::AllClustersEmpty);
    }

    // Per-cluster pick queues, most preferred first.
    let mut queues: Vec<Vec<DocId>> = Vec::with_capacity(clusters.len());
    for (c, members) in clusters.iter().enumerate() {
        let mut members = members.clone();
        match pick {
            ClusterPick::Random => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(crate::derive_seed(rng_seed, c as u64));
                let mut ids: Vec<DocId> = members.iter().map(|&(id, _)| id).collect();
                ids.shuffle(&mut rng);
                queues.push(ids);
                continue;
            }
            ClusterPick::Center => {
                members.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
            }
            ClusterPick::Border => {
                members.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            }
        }
        queues.push(members.into_iter().map(|(id, _)| id).collect());
    }

    // Clusters in descending membership order, cluster id breaking ties.
    let mut cluster_order: Vec<usize> = (0..clusters.len()).collect();
    cluster_order.sort_by(|&a, &b| clusters[b].len().cmp(&clusters[a].len()).then(a.cmp(&b)));

    let mut cursors = vec![0usize; queues.len()];
    let mut selected = Vec::with_capacity(batch);
    while selected.len() < batch {
        let mut progressed = false;
        for &c in &cluster_order {
            if selected.len() == batch {
                break;
            }
            if cursors[c] < queues[c].len() {
                selected.push(queues[c][cursors[c]]);
                cursors[c] += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    Ok(selected)
}

/// Stage-1 candidate set of the two-stage method: up to `m_per_cluster`
/// ids drawn uniformly from each cluster, returned in ascending id order.
pub fn two_stage_candidates(
    cluster_model: &ClusterModel,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
    m_per_cluster: usize,
    rng_seed: u64,
) -> Result<Vec<DocId>> {
    let clusters = group_by_cluster(cluster_model, rows, pool_ids)?;
    let mut candidates = Vec::new();
    for (c, members) in clusters.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(rng_seed, c as u64));
        let mut ids: Vec<DocId> = members.iter().map(|&(id, _)| id).collect();
        let take = m_per_cluster.min(ids.len());
        let (picked, _) = ids.partial_shuffle(&mut rng, take);
        candidates.extend_from_slice(picked);
    }
    candidates.sort_unstable();
    Ok(candidates)
}

/// Cluster-stratified candidate draw followed by uncertainty ranking over
/// the candidates only.
#[allow(clippy::too_many_arguments)]
pub fn select_two_stage(
    cluster_model: &ClusterModel,
    model: &TrainedModel,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
    batch: usize,
    measure: Measure,
    aggregation: Aggregation,
    m_per_cluster: usize,
    rng_seed: u64,
) -> Result<Vec<DocId>> {
    check_batch(batch, pool_ids.len())?;
    let candidates = two_stage_candidates(cluster_model, rows, pool_ids, m_per_cluster, rng_seed)?;
    if candidates.len() < batch {
        return Err(Error::CandidateSetTooSmall { candidates: candidates.len(), batch });
    }
    let mut candidate_rows = Vec::with_capacity(candidates.len());
    for &id in &candidates {
        let i = pool_ids.iter().position(|&p| p == id).expect("candidate came from the pool");
        candidate_rows.push(rows[i]);
    }
    select_uncertainty(model, &candidate_rows, &candidates, batch, measure, aggregation)
}

/// Dispatches a strategy to its selector. `model` is required by the
/// uncertainty-bearing families, `cluster` by the cluster-based ones.
#[allow(clippy::too_many_arguments)]
pub fn select_batch(
    strategy: &Strategy,
    model: Option<&TrainedModel>,
    cluster: Option<&ClusterModel>,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
    batch: usize,
    rng_seed: u64,
) -> Result<Vec<DocId>> {
    let need_model = || model.expect("strategy requires a trained model");
    let need_cluster = || cluster.expect("strategy requires a cluster model");
    match *strategy {
        Strategy::Random => select_random(pool_ids, batch, rng_seed),
        Strategy::Uncertainty { measure, aggregation } => {
            select_uncertainty(need_model(), rows, pool_ids, batch, measure, aggregation)
        }
        Strategy::Cluster { pick, .. } => {
            select_cluster(need_cluster(), rows, pool_ids, batch, pick, rng_seed)
        }
        Strategy::TwoStage { measure, aggregation, m_per_cluster, .. } => select_two_stage(
            need_cluster(),
            need_model(),
            rows,
            pool_ids,
            batch,
            measure,
            aggregation,
            m_per_cluster,
            rng_seed,
        ),
        Strategy::Wum { measure, aggregation, .. } => select_wum(
            need_cluster(),
            need_model(),
            rows,
            pool_ids,
            batch,
            measure,
            aggregation,
        ),
    }
}

/// Weighted uncertainty metric: aggregated uncertainty times the
/// centroid-proximity weight `1 / (1 + d)`.
pub fn select_wum(
    cluster_model: &ClusterModel,
    model: &TrainedModel,
    rows: &[&FeatureVector],
    pool_ids: &[DocId],
    batch: usize,
    measure: Measure,
    aggregation: Aggregation,
) -> Result<Vec<DocId>> {
    check_batch(batch, pool_ids.len())?;
    let mut scored = Vec::with_capacity(pool_ids.len());
    for (&id, row) in pool_ids.iter().zip(rows) {
        let u = instance_uncertainty(model, row, measure, aggregation)?;
        let (_, d) = distance_to_centroid(row, cluster_model)?;
        scored.push((id, u / (1.0 + d)));
    }
    Ok(top_by_score(scored, batch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::kmeans_fit;
    use crate::features::FeatureMatrix;
    use crate::models::{fit, ModelConfig, ModelKind};

    #[test]
    fn lc_raw_matches_formula() {
        assert_eq!(lc_raw(0.5).unwrap(), 0.0);
        assert!((lc_raw(0.9).unwrap() - 0.4).abs() < 1e-15);
        assert!((lc_raw(0.1).unwrap() - 0.4).abs() < 1e-15);
        assert!(lc_raw(1.2).is_err());
        assert!(lc_raw(-0.1).is_err());
    }

    #[test]
    fn lc_uncertainty_flips_orientation() {
        assert_eq!(lc_uncertainty(0.5).unwrap(), 0.5);
        assert_eq!(lc_uncertainty(1.0).unwrap(), 0.0);
        // Descending lc_uncertainty equals ascending lc_raw.
        let ps = [0.5, 0.7, 0.95];
        let mut by_unc: Vec<f64> = ps.to_vec();
        by_unc.sort_by(|a, b| {
            lc_uncertainty(*b).unwrap().total_cmp(&lc_uncertainty(*a).unwrap())
        });
        let mut by_raw: Vec<f64> = ps.to_vec();
        by_raw.sort_by(|a, b| lc_raw(*a).unwrap().total_cmp(&lc_raw(*b).unwrap()));
        assert_eq!(by_unc, by_raw);
    }

    #[test]
    fn binary_entropy_matches_formula() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert!(binary_entropy(0.0).unwrap() < 1e-10);
        assert!(binary_entropy(1.0).unwrap() < 1e-10);
        assert!((binary_entropy(0.25).unwrap() - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn aggregate_mean_and_mode() {
        assert!((aggregate(&[0.2, 0.4, 0.6], Aggregation::Mean).unwrap() - 0.4).abs() < 1e-15);
        // All bins distinct: tie broken toward the highest bin.
        assert_eq!(aggregate(&[0.21, 0.22, 0.90], Aggregation::Mode).unwrap(), 0.90);
        assert_eq!(aggregate(&[0.30, 0.30, 0.80], Aggregation::Mode).unwrap(), 0.30);
        assert!(aggregate(&[], Aggregation::Mean).is_err());
    }

    #[test]
    fn strategy_names_roundtrip() {
        let names = strategy_names();
        assert_eq!(names.len(), 22);
        for name in &names {
            assert_eq!(&Strategy::parse(name).unwrap().name(), name);
        }
        assert!(names.contains(&"random".to_string()));
        assert!(names.contains(&"be_mode_ts".to_string()));
        assert!(names.contains(&"lc_mean_w".to_string()));
        assert!(names.contains(&"kmeans_b5".to_string()));
        assert!(Strategy::parse("nope").is_err());
    }

    fn matrix(points: &[Vec<f64>]) -> FeatureMatrix {
        let dim = points[0].len();
        FeatureMatrix {
            rows: points
                .iter()
                .map(|p| {
                    FeatureVector::new(
                        p.iter().enumerate().map(|(i, &v)| (i, v)).collect(),
                        dim,
                    )
                })
                .collect(),
            row_ids: (0..points.len() as u64).collect(),
            dim,
        }
    }

    /// A model with one fitted head over 2 features.
    fn toy_model() -> TrainedModel {
        let x = matrix(&[vec![1.0, 0.0], vec![-1.0, 0.0], vec![2.0, 1.0], vec![-2.0, 1.0]]);
        let y = vec![vec![1], vec![0], vec![1], vec![0]];
        fit(&ModelConfig { kind: ModelKind::parse("lr").unwrap(), rng_seed: 1 }, &x, &y).unwrap()
    }

    #[test]
    fn select_random_contract() {
        let pool: Vec<DocId> = (1..=100).collect();
        let a = select_random(&pool, 10, 77).unwrap();
        let b = select_random(&pool, 10, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let mut dedup = a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
        assert!(a.iter().all(|id| pool.contains(id)));

        let whole = select_random(&pool, 100, 3).unwrap();
        assert_eq!(whole.len(), 100);
        assert!(select_random(&pool, 0, 3).unwrap().is_empty());
        assert!(select_random(&pool, 101, 3).is_err());
    }

    #[test]
    fn select_uncertainty_ranks_descending_with_id_ties() {
        let model = toy_model();
        // Feature 0 drives the label: 0.0 is maximally uncertain.
        let x = matrix(&[vec![0.0, 0.0], vec![3.0, 0.0], vec![0.5, 0.0]]);
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let ids = vec![7, 2, 5];
        let picked = select_uncertainty(
            &model,
            &rows,
            &ids,
            2,
            Measure::Entropy,
            Aggregation::Mean,
        )
        .unwrap();
        assert_eq!(picked, vec![7, 5], "most uncertain first");
        assert!(select_uncertainty(&model, &rows, &ids, 4, Measure::Entropy, Aggregation::Mean)
            .is_err());
    }

    #[test]
    fn constant_probability_model_degenerates_to_lowest_ids() {
        // An all-negative label column yields the constant 0.01 predictor.
        let x = matrix(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let y = vec![vec![1, 0], vec![0, 0]];
        let model =
            fit(&ModelConfig { kind: ModelKind::parse("lr").unwrap(), rng_seed: 1 }, &x, &y)
                .unwrap();
        let pool = matrix(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]);
        let rows: Vec<&FeatureVector> = pool.rows.iter().collect();
        let ids = vec![31, 4, 17];
        let picked =
            select_uncertainty(&model, &rows, &ids, 2, Measure::Entropy, Aggregation::Mean)
                .unwrap();
        assert_eq!(picked, vec![4, 17]);
    }

    fn clustered_pool() -> (FeatureMatrix, ClusterModel, Vec<DocId>) {
        // Two blobs: 6 points near the origin, 4 near (10, 10).
        let mut points = Vec::new();
        for i in 0..6 {
            points.push(vec![0.1 * i as f64, 0.05 * i as f64]);
        }
        for i in 0..4 {
            points.push(vec![10.0 + 0.1 * i as f64, 10.0 - 0.1 * i as f64]);
        }
        let x = matrix(&points);
        let model = kmeans_fit(&x, 2, 5, 100, 1e-8).unwrap();
        let ids: Vec<DocId> = (0..10).collect();
        (x, model, ids)
    }

    #[test]
    fn select_cluster_round_robin_allocation() {
        let (x, model, ids) = clustered_pool();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let picked =
            select_cluster(&model, &rows, &ids, 4, ClusterPick::Random, 11).unwrap();
        assert_eq!(picked.len(), 4);
        let big: Vec<DocId> = (0..6).collect();
        let small: Vec<DocId> = (6..10).collect();
        let from_big = picked.iter().filter(|id| big.contains(id)).count();
        let from_small = picked.iter().filter(|id| small.contains(id)).count();
        assert_eq!((from_big, from_small), (2, 2), "round-robin over sizes 6 and 4");
        // Larger cluster goes first.
        assert!(big.contains(&picked[0]));
        assert!(small.contains(&picked[1]));
    }

    #[test]
    fn select_cluster_center_picks_member_on_centroid() {
        let x = matrix(&[vec![5.0], vec![5.2], vec![4.8], vec![20.0]]);
        let model = kmeans_fit(&x, 2, 3, 100, 1e-8).unwrap();
        let ids: Vec<DocId> = (0..4).collect();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let picked = select_cluster(&model, &rows, &ids, 2, ClusterPick::Center, 0).unwrap();
        // 5.0 sits exactly on its cluster mean; 20.0 is its own centroid.
        assert_eq!(picked, vec![0, 3]);
    }

    #[test]
    fn select_cluster_border_picks_farthest() {
        let x = matrix(&[vec![0.0], vec![1.0], vec![10.0], vec![100.0]]);
        let model = kmeans_fit(&x, 2, 1, 100, 1e-8).unwrap();
        let ids: Vec<DocId> = (0..4).collect();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let picked = select_cluster(&model, &rows, &ids, 1, ClusterPick::Border, 0).unwrap();
        // The collinear cluster {0, 1, 10} has centroid 11/3; 10 is farthest.
        assert_eq!(picked, vec![2]);
    }

    #[test]
    fn two_stage_with_full_candidates_equals_plain_uncertainty() {
        let (x, cluster, ids) = clustered_pool();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let model = toy_model();
        let ts = select_two_stage(
            &cluster, &model, &rows, &ids, 5,
            Measure::LeastConfidence, Aggregation::Mean, 100, 9,
        )
        .unwrap();
        let plain = select_uncertainty(
            &model, &rows, &ids, 5, Measure::LeastConfidence, Aggregation::Mean,
        )
        .unwrap();
        assert_eq!(ts, plain, "stage 1 covering the whole pool is the identity");
    }

    #[test]
    fn two_stage_output_is_within_candidates() {
        let (x, cluster, ids) = clustered_pool();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let model = toy_model();
        let candidates = two_stage_candidates(&cluster, &rows, &ids, 1, 9).unwrap();
        assert_eq!(candidates.len(), 2, "one candidate per cluster");
        let picked = select_two_stage(
            &cluster, &model, &rows, &ids, 2,
            Measure::Entropy, Aggregation::Mean, 1, 9,
        )
        .unwrap();
        let mut sorted = picked.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, candidates, "no slack: exactly the sampled candidates");
        assert!(select_two_stage(
            &cluster, &model, &rows, &ids, 3,
            Measure::Entropy, Aggregation::Mean, 1, 9,
        )
        .is_err());
    }

    #[test]
    fn two_stage_is_deterministic() {
        let (x, cluster, ids) = clustered_pool();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let model = toy_model();
        let a = select_two_stage(
            &cluster, &model, &rows, &ids, 4,
            Measure::Entropy, Aggregation::Mode, 3, 21,
        )
        .unwrap();
        let b = select_two_stage(
            &cluster, &model, &rows, &ids, 4,
            Measure::Entropy, Aggregation::Mode, 3, 21,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wum_with_zero_distance_equals_plain_uncertainty() {
        // Two distinct points, k = 2: every point is its own centroid.
        let x = matrix(&[vec![0.0, 0.0], vec![10.0, 0.0]]);
        let cluster = kmeans_fit(&x, 2, 0, 100, 1e-8).unwrap();
        let model = toy_model();
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let ids = vec![3, 8];
        let wum = select_wum(
            &cluster, &model, &rows, &ids, 2, Measure::Entropy, Aggregation::Mean,
        )
        .unwrap();
        let plain = select_uncertainty(
            &model, &rows, &ids, 2, Measure::Entropy, Aggregation::Mean,
        )
        .unwrap();
        assert_eq!(wum, plain);
    }

    #[test]
    fn wum_prefers_the_nearer_of_equally_uncertain_points() {
        let fit_points = matrix(&[vec![0.0, 0.0], vec![20.0, 0.0]]);
        let cluster = kmeans_fit(&fit_points, 2, 0, 100, 1e-8).unwrap();
        let model = toy_model();
        // Feature 0 drives the lone label; x0 = 0 gives p = 0.5 for both.
        let pool = matrix(&[vec![0.0, 3.0], vec![0.0, 0.0]]);
        let rows: Vec<&FeatureVector> = pool.rows.iter().collect();
        let (_, d0) = distance_to_centroid(rows[0], &cluster).unwrap();
        let (_, d1) = distance_to_centroid(rows[1], &cluster).unwrap();
        assert!((d0 - 3.0).abs() < 1e-12 && d1 < 1e-12);
        let picked = select_wum(
            &cluster, &model, &rows, &[9, 12], 2, Measure::Entropy, Aggregation::Mean,
        )
        .unwrap();
        // Relevance ratio 1 : 0.25 ranks the on-centroid point first.
        assert_eq!(picked, vec![12, 9]);
    }

    #[test]
    fn wum_zero_uncertainty_falls_back_to_lowest_ids() {
        // Degenerate-constant model emits 0.01 everywhere: entropy ties, so
        // id order decides.
        let x = matrix(&[vec![1.0, 0.0], vec![-1.0, 0.0]]);
        let y = vec![vec![0], vec![0]];
        let model =
            fit(&ModelConfig { kind: ModelKind::parse("lr").unwrap(), rng_seed: 1 }, &x, &y)
                .unwrap();
        let pool = matrix(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]]);
        let cluster =
            kmeans_fit(&matrix(&[vec![0.0, 0.0], vec![1.0, 1.0]]), 2, 0, 10, 1e-6).unwrap();
        let rows: Vec<&FeatureVector> = pool.rows.iter().collect();
        let picked = select_wum(
            &cluster, &model, &rows, &[42, 7, 19], 2, Measure::Entropy, Aggregation::Mean,
        )
        .unwrap();
        assert_eq!(picked, vec![7, 19]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn entropy_and_lc_agree_on_ranking(ps in proptest::collection::vec(0.0f64..=1.0, 2..20)) {
                // Both measures are monotone decreasing in |0.5 - p|, so the
                // sorted |0.5 - p| keys must coincide.
                let mut by_entropy: Vec<usize> = (0..ps.len()).collect();
                by_entropy.sort_by(|&a, &b| {
                    binary_entropy(ps[a]).unwrap().total_cmp(&binary_entropy(ps[b]).unwrap()).then(a.cmp(&b))
                });
                let mut by_lc: Vec<usize> = (0..ps.len()).collect();
                by_lc.sort_by(|&a, &b| {
                    lc_uncertainty(ps[a]).unwrap().total_cmp(&lc_uncertainty(ps[b]).unwrap()).then(a.cmp(&b))
                });
                let key = |i: usize| (0.5 - ps[i]).abs();
                for (&a, &b) in by_entropy.iter().zip(&by_lc) {
                    prop_assert!((key(a) - key(b)).abs() < 1e-12);
                }
            }

            #[test]
            fn both_measures_symmetric_and_maximal_at_half(p in 0.0f64..=1.0) {
                prop_assert!((binary_entropy(p).unwrap() - binary_entropy(1.0 - p).unwrap()).abs() < 1e-9);
                prop_assert!((lc_uncertainty(p).unwrap() - lc_uncertainty(1.0 - p).unwrap()).abs() < 1e-12);
                prop_assert!(binary_entropy(p).unwrap() <= 1.0);
                prop_assert!(lc_uncertainty(p).unwrap() <= 0.5);
            }
        }
    }
}
