//! Three multi-label probabilistic classifiers behind one contract: fit on
//! labeled data, emit per-label posterior probabilities on any instance.
//!
//! Labels are independent binary tasks. A label column with no positive
//! (or no negative) examples yields a constant predictor at 0.01 (or 0.99)
//! so early iterations with few samples never abort the loop.

mod forest;
mod io;
mod lbfgs;
mod logistic;
mod network;

pub use forest::{Forest, ForestParams, Node, Tree};
pub use io::{load_model, read_model, save_model, write_model};
pub use logistic::{LogisticHead, LogisticParams};
pub use network::{min_abs_preactivation, Dims, Network, NetworkParams};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};
use crate::LabelVec;

/// Probability emitted for a label with no positive training example.
pub const DEGENERATE_NEGATIVE: f64 = 0.01;
/// Probability emitted for a label with no negative training example.
pub const DEGENERATE_POSITIVE: f64 = 0.99;

/// Classifier family plus its hyperparameters.
#[derive(Debug, Clone)]
pub enum ModelKind {
    Logistic(LogisticParams),
    Forest(ForestParams),
    Network(NetworkParams),
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Logistic(_) => "lr",
            ModelKind::Forest(_) => "rf",
            ModelKind::Network(_) => "fnn",
        }
    }

    pub fn parse(name: &str) -> Result<ModelKind> {
        match name {
            "lr" => Ok(ModelKind::Logistic(LogisticParams::default())),
            "rf" => Ok(ModelKind::Forest(ForestParams::default())),
            "fnn" => Ok(ModelKind::Network(NetworkParams::default())),
            _ => Err(Error::UnknownModel { name: name.to_string() }),
        }
    }
}

/// Accepted model names, in reporting order.
pub const MODEL_NAMES: &[&str] = &["lr", "rf", "fnn"];

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub rng_seed: u64,
}

/// Per-label predictor: either a fitted head or the degenerate constant.
#[derive(Debug, Clone)]
pub enum LabelHead<T> {
    Constant(f64),
    Fit(T),
}

#[derive(Debug, Clone)]
pub struct LogisticModel {
    pub dim: usize,
    pub heads: Vec<LabelHead<LogisticHead>>,
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    pub dim: usize,
    pub heads: Vec<LabelHead<Forest>>,
}

#[derive(Debug, Clone)]
pub struct NetworkModel {
    pub net: Network,
    /// Degenerate-label overrides applied on top of the network outputs.
    pub overrides: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Network(NetworkModel),
}

impl TrainedModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            TrainedModel::Logistic(_) => "lr",
            TrainedModel::Forest(_) => "rf",
            TrainedModel::Network(_) => "fnn",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.dim,
            TrainedModel::Forest(m) => m.dim,
            TrainedModel::Network(m) => m.net.dims.input,
        }
    }

    pub fn n_labels(&self) -> usize {
        match self {
            TrainedModel::Logistic(m) => m.heads.len(),
            TrainedModel::Forest(m) => m.heads.len(),
            TrainedModel::Network(m) => m.overrides.len(),
        }
    }
}

/// Returns the degenerate constant for a label column, if any.
fn degenerate_constant(column: &[u8]) -> Option<f64> {
    let positives = column.iter().filter(|&&v| v != 0).count();
    if positives == 0 {
        Some(DEGENERATE_NEGATIVE)
    } else if positives == column.len() {
        Some(DEGENERATE_POSITIVE)
    } else {
        None
    }
}

fn validate_training_set(x: &FeatureMatrix, y: &[LabelVec]) -> Result<usize> {
    if x.n_rows() == 0 || y.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if x.n_rows() != y.len() {
        return Err(Error::ShapeMismatch {
            reason: format!("{} feature rows vs {} label vectors", x.n_rows(), y.len()),
        });
    }
    let k = y[0].len();
    if k == 0 || y.iter().any(|row| row.len() != k) {
        return Err(Error::ShapeMismatch {
            reason: "label vectors empty or of unequal length".to_string(),
        });
    }
    Ok(k)
}

/// Fits the configured classifier on a labeled set.
pub fn fit(config: &ModelConfig, x: &FeatureMatrix, y: &[LabelVec]) -> Result<TrainedModel> {
    let k = validate_training_set(x, y)?;
    let rows: Vec<&FeatureVector> = x.rows.iter().collect();
    match &config.kind {
        ModelKind::Logistic(params) => {
            let mut heads = Vec::with_capacity(k);
            for j in 0..k {
                let column: Vec<u8> = y.iter().map(|row| row[j]).collect();
                let head = match degenerate_constant(&column) {
                    Some(c) => LabelHead::Constant(c),
                    None => LabelHead::Fit(logistic::fit_head(&rows, &column, x.dim, params)),
                };
                heads.push(head);
            }
            Ok(TrainedModel::Logistic(LogisticModel { dim: x.dim, heads }))
        }
        ModelKind::Forest(params) => {
            let mut heads = Vec::with_capacity(k);
            for j in 0..k {
                let column: Vec<u8> = y.iter().map(|row| row[j]).collect();
                let head = match degenerate_constant(&column) {
                    Some(c) => LabelHead::Constant(c),
                    None => {
                        let seed = crate::derive_seed(config.rng_seed, j as u64);
                        LabelHead::Fit(forest::fit_forest(&rows, &column, x.dim, params, seed))
                    }
                };
                heads.push(head);
            }
            Ok(TrainedModel::Forest(ForestModel { dim: x.dim, heads }))
        }
        ModelKind::Network(params) => {
            let dims = Dims {
                input: x.dim,
                h1: params.hidden.0,
                h2: params.hidden.1,
                output: k,
            };
            let overrides: Vec<Option<f64>> = (0..k)
                .map(|j| {
                    let column: Vec<u8> = y.iter().map(|row| row[j]).collect();
                    degenerate_constant(&column)
                })
                .collect();
            let net = network::fit_network(&rows, y, dims, params, config.rng_seed);
            Ok(TrainedModel::Network(NetworkModel { net, overrides }))
        }
    }
}

/// Per-label posterior probabilities for one instance.
pub fn predict_proba(model: &TrainedModel, x: &FeatureVector) -> Result<Vec<f64>> {
    if x.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.dim() });
    }
    Ok(match model {
        TrainedModel::Logistic(m) => m
            .heads
            .iter()
            .map(|head| match head {
                LabelHead::Constant(c) => *c,
                LabelHead::Fit(h) => h.probability(x),
            })
            .collect(),
        TrainedModel::Forest(m) => m
            .heads
            .iter()
            .map(|head| match head {
                LabelHead::Constant(c) => *c,
                LabelHead::Fit(f) => f.probability(x),
            })
            .collect(),
        TrainedModel::Network(m) => {
            let mut probs = m.net.probabilities(x);
            for (p, o) in probs.iter_mut().zip(&m.overrides) {
                if let Some(c) = o {
                    *p = *c;
                }
            }
            probs
        }
    })
}

/// Thresholded binary prediction: entry j is 1 iff `probs[j] >= threshold`.
pub fn predict(model: &TrainedModel, x: &FeatureVector, threshold: f64) -> Result<LabelVec> {
    let probs = predict_proba(model, x)?;
    Ok(apply_threshold(&probs, threshold))
}

pub fn apply_threshold(probs: &[f64], threshold: f64) -> LabelVec {
    probs.iter().map(|&p| u8::from(p >= threshold)).collect()
}

/// Training objective and exact analytic gradient at the given parameters,
/// for the differentiable kinds.
///
/// Logistic parameters are the per-label `[w, b]` blocks concatenated in
/// label order (`k * (dim + 1)` values); the objective is the sum of the
/// per-label regularized objectives. Network parameters follow the
/// [`Network::params`] layout.
pub fn loss_and_gradient(
    config: &ModelConfig,
    parameters: &[f64],
    x: &FeatureMatrix,
    y: &[LabelVec],
) -> Result<(f64, Vec<f64>)> {
    let k = validate_training_set(x, y)?;
    let rows: Vec<&FeatureVector> = x.rows.iter().collect();
    match &config.kind {
        ModelKind::Forest(_) => Err(Error::NonDifferentiableModel { kind: "rf" }),
        ModelKind::Logistic(params) => {
            let block = x.dim + 1;
            if parameters.len() != k * block {
                return Err(Error::ShapeMismatch {
                    reason: format!("expected {} parameters, got {}", k * block, parameters.len()),
                });
            }
            let mut grad = vec![0.0; parameters.len()];
            let mut loss = 0.0;
            for j in 0..k {
                let column: Vec<u8> = y.iter().map(|row| row[j]).collect();
                loss += logistic::binary_objective(
                    &parameters[j * block..(j + 1) * block],
                    &mut grad[j * block..(j + 1) * block],
                    &rows,
                    &column,
                    params.l2,
                );
            }
            Ok((loss, grad))
        }
        ModelKind::Network(params) => {
            let dims = Dims {
                input: x.dim,
                h1: params.hidden.0,
                h2: params.hidden.1,
                output: k,
            };
            if parameters.len() != dims.n_params() {
                return Err(Error::ShapeMismatch {
                    reason: format!(
                        "expected {} parameters, got {}",
                        dims.n_params(),
                        parameters.len()
                    ),
                });
            }
            Ok(network::loss_and_gradient(&dims, parameters, &rows, y))
        }
    }
}

/// Fresh initial parameter vector for the differentiable kinds, shaped for
/// [`loss_and_gradient`]. Logistic starts at zero; the network uses its
/// seeded Glorot init.
pub fn initial_parameters(config: &ModelConfig, dim: usize, k: usize) -> Result<Vec<f64>> {
    match &config.kind {
        ModelKind::Forest(_) => Err(Error::NonDifferentiableModel { kind: "rf" }),
        ModelKind::Logistic(_) => Ok(vec![0.0; k * (dim + 1)]),
        ModelKind::Network(params) => {
            let dims = Dims { input: dim, h1: params.hidden.0, h2: params.hidden.1, output: k };
            Ok(network::init_params(&dims, crate::derive_seed(config.rng_seed, 0)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureMatrix;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new(
            values.iter().enumerate().map(|(i, &v)| (i, v)).collect(),
            values.len(),
        )
    }

    fn matrix(points: &[Vec<f64>]) -> FeatureMatrix {
        let dim = points[0].len();
        FeatureMatrix {
            rows: points.iter().map(|p| fv(p)).collect(),
            row_ids: (0..points.len() as u64).collect(),
            dim,
        }
    }

    fn config(kind: ModelKind) -> ModelConfig {
        ModelConfig { kind, rng_seed: 7 }
    }

    fn separable_training_set() -> (FeatureMatrix, Vec<LabelVec>) {
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            points.push(vec![2.0 + 0.1 * i as f64, 1.0]);
            labels.push(vec![1u8]);
            points.push(vec![-2.0 - 0.1 * i as f64, 1.0]);
            labels.push(vec![0u8]);
        }
        (matrix(&points), labels)
    }

    #[test]
    fn logistic_fits_separable_data_to_full_training_accuracy() {
        let (x, y) = separable_training_set();
        let model = fit(&config(ModelKind::parse("lr").unwrap()), &x, &y).unwrap();
        let pred: Vec<LabelVec> =
            x.rows.iter().map(|r| predict(&model, r, 0.5).unwrap()).collect();
        let (p, r, f1) = crate::metrics::micro_prf(&crate::metrics::confusion(&pred, &y).unwrap());
        assert_eq!((p, r, f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn degenerate_all_zero_column_yields_constant_001() {
        let (x, mut y) = separable_training_set();
        for row in &mut y {
            row.push(0);
        }
        for kind in ["lr", "rf", "fnn"] {
            let model = fit(&config(ModelKind::parse(kind).unwrap()), &x, &y).unwrap();
            for row in &x.rows {
                let probs = predict_proba(&model, row).unwrap();
                assert_eq!(probs[1], DEGENERATE_NEGATIVE, "{kind}");
            }
        }
    }

    #[test]
    fn degenerate_all_one_column_yields_constant_099() {
        let (x, mut y) = separable_training_set();
        for row in &mut y {
            row.push(1);
        }
        let model = fit(&config(ModelKind::parse("lr").unwrap()), &x, &y).unwrap();
        let probs = predict_proba(&model, &x.rows[0]).unwrap();
        assert_eq!(probs[1], DEGENERATE_POSITIVE);
    }

    #[test]
    fn probabilities_stay_in_unit_interval() {
        let (x, y) = separable_training_set();
        for kind in ["lr", "rf", "fnn"] {
            let model = fit(&config(ModelKind::parse(kind).unwrap()), &x, &y).unwrap();
            for row in &x.rows {
                for p in predict_proba(&model, row).unwrap() {
                    assert!((0.0..=1.0).contains(&p), "{kind}: {p}");
                    if kind != "rf" {
                        assert!(p > 0.0 && p < 1.0, "{kind} must be strictly inside (0,1)");
                    }
                }
            }
        }
    }

    #[test]
    fn refit_reproduces_identical_parameters() {
        let (x, y) = separable_training_set();
        for kind in ["lr", "rf", "fnn"] {
            let cfg = config(ModelKind::parse(kind).unwrap());
            let a = fit(&cfg, &x, &y).unwrap();
            let b = fit(&cfg, &x, &y).unwrap();
            for row in &x.rows {
                let pa = predict_proba(&a, row).unwrap();
                let pb = predict_proba(&b, row).unwrap();
                let bits_a: Vec<u64> = pa.iter().map(|p| p.to_bits()).collect();
                let bits_b: Vec<u64> = pb.iter().map(|p| p.to_bits()).collect();
                assert_eq!(bits_a, bits_b, "{kind}");
            }
        }
    }

    #[test]
    fn fit_rejects_empty_and_mismatched_input() {
        let x = matrix(&[vec![1.0, 0.0]]);
        let cfg = config(ModelKind::parse("lr").unwrap());
        assert!(matches!(fit(&cfg, &x, &[]), Err(Error::EmptyTrainingSet)));
        assert!(fit(&cfg, &x, &[vec![1], vec![0]]).is_err());
    }

    #[test]
    fn predict_proba_rejects_dimension_mismatch() {
        let (x, y) = separable_training_set();
        let model = fit(&config(ModelKind::parse("lr").unwrap()), &x, &y).unwrap();
        assert!(predict_proba(&model, &fv(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn threshold_rules() {
        assert_eq!(apply_threshold(&[0.6, 0.4], 0.5), vec![1, 0]);
        assert_eq!(apply_threshold(&[0.5], 0.5), vec![1], ">= rule");
        assert_eq!(apply_threshold(&[0.6, 0.4], 0.99), vec![0, 0]);
    }

    #[test]
    fn loss_and_gradient_rejects_forest() {
        let (x, y) = separable_training_set();
        let cfg = config(ModelKind::parse("rf").unwrap());
        let result = loss_and_gradient(&cfg, &[], &x, &y);
        assert!(matches!(result, Err(Error::NonDifferentiableModel { .. })));
    }

    #[test]
    fn logistic_loss_at_zero_is_ln2_per_example() {
        let (x, y) = separable_training_set();
        let cfg = config(ModelKind::parse("lr").unwrap());
        let params = initial_parameters(&cfg, x.dim, 1).unwrap();
        let (loss, _) = loss_and_gradient(&cfg, &params, &x, &y).unwrap();
        assert!((loss - x.n_rows() as f64 * std::f64::consts::LN_2).abs() < 1e-9);
    }

    /// Central finite differences over every parameter.
    fn finite_difference_gradient(
        cfg: &ModelConfig,
        params: &[f64],
        x: &FeatureMatrix,
        y: &[LabelVec],
        step: f64,
    ) -> Vec<f64> {
        let mut fd = Vec::with_capacity(params.len());
        let mut probe = params.to_vec();
        for i in 0..params.len() {
            probe[i] = params[i] + step;
            let (plus, _) = loss_and_gradient(cfg, &probe, x, y).unwrap();
            probe[i] = params[i] - step;
            let (minus, _) = loss_and_gradient(cfg, &probe, x, y).unwrap();
            probe[i] = params[i];
            fd.push((plus - minus) / (2.0 * step));
        }
        fd
    }

    fn max_relative_error(analytic: &[f64], fd: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(fd)
            .map(|(&a, &f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-3))
            .fold(0.0, f64::max)
    }

    #[test]
    fn logistic_gradient_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<LabelVec> = (0..12)
            .map(|_| vec![rng.gen_range(0..2) as u8, rng.gen_range(0..2) as u8])
            .collect();
        let x = matrix(&points);
        let cfg = config(ModelKind::parse("lr").unwrap());
        let params: Vec<f64> = (0..2 * 11).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let (_, analytic) = loss_and_gradient(&cfg, &params, &x, &y).unwrap();
        let fd = finite_difference_gradient(&cfg, &params, &x, &y, 1e-5);
        assert!(max_relative_error(&analytic, &fd) < 1e-5);
    }

    #[test]
    fn network_gradient_matches_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let points: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<LabelVec> = (0..8).map(|_| vec![rng.gen_range(0..2) as u8]).collect();
        let x = matrix(&points);
        let dims = Dims { input: 4, h1: 5, h2: 3, output: 1 };
        let cfg = ModelConfig {
            kind: ModelKind::Network(NetworkParams { hidden: (5, 3), ..Default::default() }),
            rng_seed: 11,
        };
        // The FD probe is only valid away from ReLU kinks: redraw the probe
        // point until every pre-activation clears a margin far above the
        // 1e-5 step.
        let rows: Vec<&FeatureVector> = x.rows.iter().collect();
        let params = loop {
            let candidate: Vec<f64> =
                (0..dims.n_params()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            if network::min_abs_preactivation(&dims, &candidate, &rows) > 1e-3 {
                break candidate;
            }
        };
        let (_, analytic) = loss_and_gradient(&cfg, &params, &x, &y).unwrap();
        let fd = finite_difference_gradient(&cfg, &params, &x, &y, 1e-5);
        assert!(max_relative_error(&analytic, &fd) < 1e-4);
    }
}
