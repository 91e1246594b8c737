//! One-vs-rest L2-regularized logistic regression trained with L-BFGS.

use crate::features::FeatureVector;

use super::lbfgs;

#[derive(Debug, Clone)]
pub struct LogisticParams {
    /// L2 regularization strength applied per label (bias unregularized).
    pub l2: f64,
    pub memory: usize,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { l2: 1.0, memory: 10, max_iter: 200, grad_tol: 1e-6 }
    }
}

/// Weights and bias for one label, plus training metadata.
#[derive(Debug, Clone)]
pub struct LogisticHead {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub final_loss: f64,
    pub loss_history: Vec<f64>,
}

impl LogisticHead {
    pub fn probability(&self, x: &FeatureVector) -> f64 {
        sigmoid(x.dot_dense(&self.weights) + self.bias)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + exp(z))`.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Objective and gradient for one binary label over sparse rows:
/// `sum_i [ln(1 + e^{z_i}) - y_i z_i] + (l2/2)||w||^2` with `z = w.x + b`.
/// The parameter vector is `[w_0 .. w_{d-1}, b]`; the gradient is written
/// into `grad`.
pub fn binary_objective(
    params: &[f64],
    grad: &mut [f64],
    rows: &[&FeatureVector],
    targets: &[u8],
    l2: f64,
) -> f64 {
    let dim = params.len() - 1;
    let (weights, bias) = (&params[..dim], params[dim]);
    for g in grad.iter_mut() {
        *g = 0.0;
    }
    let mut loss = 0.0;
    for (row, &y) in rows.iter().zip(targets) {
        let z = row.dot_dense(weights) + bias;
        let yf = f64::from(y);
        loss += softplus(z) - yf * z;
        let residual = sigmoid(z) - yf;
        for &(j, v) in row.entries() {
            grad[j] += residual * v;
        }
        grad[dim] += residual;
    }
    if l2 > 0.0 {
        for j in 0..dim {
            loss += 0.5 * l2 * weights[j] * weights[j];
            grad[j] += l2 * weights[j];
        }
    }
    loss
}

/// Fits one label head from a zero start.
pub fn fit_head(
    rows: &[&FeatureVector],
    targets: &[u8],
    dim: usize,
    params: &LogisticParams,
) -> LogisticHead {
    let objective =
        |x: &[f64], g: &mut [f64]| binary_objective(x, g, rows, targets, params.l2);
    let result = lbfgs::minimize(
        objective,
        vec![0.0; dim + 1],
        params.memory,
        params.max_iter,
        params.grad_tol,
    );
    let mut weights = result.x;
    let bias = weights.pop().expect("dim + 1 parameters");
    LogisticHead {
        weights,
        bias,
        iterations: result.iterations,
        final_loss: result.loss,
        loss_history: result.loss_history,
    }
}
