//! Feed-forward network: two ReLU hidden layers, sigmoid outputs, binary
//! cross-entropy loss, minibatch stochastic gradient descent.
//!
//! The input layer weights are stored feature-major (`w1t[j*h1 + u]`) so a
//! sparse input touches contiguous blocks in both the forward pass and the
//! weight update.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::FeatureVector;

#[derive(Debug, Clone)]
pub struct NetworkParams {
    pub hidden: (usize, usize),
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams { hidden: (500, 100), epochs: 30, learning_rate: 0.1, batch_size: 32 }
    }
}

/// Network dimensions: input, two hidden layers, output labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub input: usize,
    pub h1: usize,
    pub h2: usize,
    pub output: usize,
}

impl Dims {
    pub fn n_params(&self) -> usize {
        self.input * self.h1 + self.h1 + self.h1 * self.h2 + self.h2 + self.h2 * self.output
            + self.output
    }
}

/// Trained network. Parameters are kept as one flat vector in the layout
/// `[w1t, b1, w2, b2, w3, b3]`; see [`Dims::n_params`].
#[derive(Debug, Clone)]
pub struct Network {
    pub dims: Dims,
    pub params: Vec<f64>,
    pub epochs_run: usize,
    pub final_loss: f64,
}

struct Layout {
    w1: std::ops::Range<usize>,
    b1: std::ops::Range<usize>,
    w2: std::ops::Range<usize>,
    b2: std::ops::Range<usize>,
    w3: std::ops::Range<usize>,
    b3: std::ops::Range<usize>,
}

fn layout(d: &Dims) -> Layout {
    let w1_end = d.input * d.h1;
    let b1_end = w1_end + d.h1;
    let w2_end = b1_end + d.h1 * d.h2;
    let b2_end = w2_end + d.h2;
    let w3_end = b2_end + d.h2 * d.output;
    let b3_end = w3_end + d.output;
    Layout {
        w1: 0..w1_end,
        b1: w1_end..b1_end,
        w2: b1_end..w2_end,
        b2: w2_end..b2_end,
        w3: b2_end..w3_end,
        b3: w3_end..b3_end,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Pre-activations and activations of one forward pass.
struct Forward {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    z3: Vec<f64>,
}

fn forward(d: &Dims, lay: &Layout, params: &[f64], x: &FeatureVector) -> Forward {
    let w1 = &params[lay.w1.clone()];
    let b1 = &params[lay.b1.clone()];
    let w2 = &params[lay.w2.clone()];
    let b2 = &params[lay.b2.clone()];
    let w3 = &params[lay.w3.clone()];
    let b3 = &params[lay.b3.clone()];

    let mut z1 = b1.to_vec();
    for &(j, v) in x.entries() {
        let col = &w1[j * d.h1..(j + 1) * d.h1];
        for (zu, wu) in z1.iter_mut().zip(col) {
            *zu += wu * v;
        }
    }
    let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();

    let mut z2 = b2.to_vec();
    for (u, zv) in z2.iter_mut().enumerate() {
        let row = &w2[u * d.h1..(u + 1) * d.h1];
        *zv += row.iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>();
    }
    let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();

    let mut z3 = b3.to_vec();
    for (o, zv) in z3.iter_mut().enumerate() {
        let row = &w3[o * d.h2..(o + 1) * d.h2];
        *zv += row.iter().zip(&a2).map(|(w, a)| w * a).sum::<f64>();
    }
    Forward { z1, a1, z2, a2, z3 }
}

impl Network {
    pub fn probabilities(&self, x: &FeatureVector) -> Vec<f64> {
        let lay = layout(&self.dims);
        let f = forward(&self.dims, &lay, &self.params, x);
        f.z3.iter().map(|&z| sigmoid(z)).collect()
    }
}

/// Glorot-uniform weight initialization, zero biases.
pub fn init_params(d: &Dims, rng_seed: u64) -> Vec<f64> {
    let lay = layout(d);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut params = vec![0.0; d.n_params()];
    let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize,
                    params: &mut Vec<f64>| {
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for p in &mut params[range] {
            *p = (rng.gen::<f64>() * 2.0 - 1.0) * a;
        }
    };
    fill(lay.w1, d.input, d.h1, &mut params);
    fill(lay.w2, d.h1, d.h2, &mut params);
    fill(lay.w3, d.h2, d.output, &mut params);
    params
}

/// Backpropagates one example. `scale` multiplies the per-example gradient
/// (1/batch for a minibatch mean). Returns the example's summed BCE loss
/// and the input-layer delta for the sparse w1 update, accumulating the
/// dense layer gradients in place.
#[allow(clippy::too_many_arguments)]
fn backward_example(
    d: &Dims,
    f: &Forward,
    y: &[u8],
    scale: f64,
    params: &[f64],
    lay: &Layout,
    gw2: &mut [f64],
    gb2: &mut [f64],
    gw3: &mut [f64],
    gb3: &mut [f64],
    gb1: &mut [f64],
) -> (f64, Vec<f64>) {
    let w2 = &params[lay.w2.clone()];
    let w3 = &params[lay.w3.clone()];

    let mut loss = 0.0;
    let mut dz3 = vec![0.0; d.output];
    for o in 0..d.output {
        let z = f.z3[o];
        let yf = f64::from(y[o]);
        loss += softplus(z) - yf * z;
        dz3[o] = (sigmoid(z) - yf) * scale;
    }

    let mut da2 = vec![0.0; d.h2];
    for o in 0..d.output {
        let g = dz3[o];
        gb3[o] += g;
        let grow = &mut gw3[o * d.h2..(o + 1) * d.h2];
        let wrow = &w3[o * d.h2..(o + 1) * d.h2];
        for h in 0..d.h2 {
            grow[h] += g * f.a2[h];
            da2[h] += wrow[h] * g;
        }
    }

    let mut dz2 = da2;
    for (h, dz) in dz2.iter_mut().enumerate() {
        if f.z2[h] <= 0.0 {
            *dz = 0.0;
        }
    }

    let mut da1 = vec![0.0; d.h1];
    for h in 0..d.h2 {
        let g = dz2[h];
        if g == 0.0 {
            continue;
        }
        gb2[h] += g;
        let grow = &mut gw2[h * d.h1..(h + 1) * d.h1];
        let wrow = &w2[h * d.h1..(h + 1) * d.h1];
        for u in 0..d.h1 {
            grow[u] += g * f.a1[u];
            da1[u] += wrow[u] * g;
        }
    }

    let mut dz1 = da1;
    for (u, dz) in dz1.iter_mut().enumerate() {
        if f.z1[u] <= 0.0 {
            *dz = 0.0;
        }
        gb1[u] += *dz;
    }
    (loss, dz1)
}

/// Trains from a fresh Glorot init with minibatch SGD. The objective per
/// minibatch is the mean over its examples of the per-example summed BCE.
pub fn fit_network(
    rows: &[&FeatureVector],
    targets: &[Vec<u8>],
    dims: Dims,
    hp: &NetworkParams,
    rng_seed: u64,
) -> Network {
    let lay = layout(&dims);
    let mut params = init_params(&dims, crate::derive_seed(rng_seed, 0));
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(crate::derive_seed(rng_seed, 1));
    let lr = hp.learning_rate;

    let mut gw2 = vec![0.0; dims.h1 * dims.h2];
    let mut gb2 = vec![0.0; dims.h2];
    let mut gw3 = vec![0.0; dims.h2 * dims.output];
    let mut gb3 = vec![0.0; dims.output];
    let mut gb1 = vec![0.0; dims.h1];

    let mut epoch_loss = 0.0;
    for _ in 0..hp.epochs {
        order.shuffle(&mut shuffle_rng);
        epoch_loss = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let scale = 1.0 / batch.len() as f64;
            for g in gw2.iter_mut() { *g = 0.0; }
            for g in gb2.iter_mut() { *g = 0.0; }
            for g in gw3.iter_mut() { *g = 0.0; }
            for g in gb3.iter_mut() { *g = 0.0; }
            for g in gb1.iter_mut() { *g = 0.0; }
            let mut sparse_updates: Vec<(usize, Vec<f64>)> = Vec::with_capacity(batch.len());

            for &i in batch {
                let f = forward(&dims, &lay, &params, rows[i]);
                let (loss, dz1) = backward_example(
                    &dims, &f, &targets[i], scale, &params, &lay,
                    &mut gw2, &mut gb2, &mut gw3, &mut gb3, &mut gb1,
                );
                epoch_loss += loss;
                sparse_updates.push((i, dz1));
            }

            // Dense layer updates.
            for (p, g) in params[lay.w2.clone()].iter_mut().zip(&gw2) {
                *p -= lr * g;
            }
            for (p, g) in params[lay.b2.clone()].iter_mut().zip(&gb2) {
                *p -= lr * g;
            }
            for (p, g) in params[lay.w3.clone()].iter_mut().zip(&gw3) {
                *p -= lr * g;
            }
            for (p, g) in params[lay.b3.clone()].iter_mut().zip(&gb3) {
                *p -= lr * g;
            }
            for (p, g) in params[lay.b1.clone()].iter_mut().zip(&gb1) {
                *p -= lr * g;
            }
            // Sparse input-layer updates: only columns present in the batch.
            let w1 = &mut params[lay.w1.clone()];
            for (i, dz1) in &sparse_updates {
                for &(j, v) in rows[*i].entries() {
                    let col = &mut w1[j * dims.h1..(j + 1) * dims.h1];
                    let step = lr * v;
                    for (w, dz) in col.iter_mut().zip(dz1) {
                        *w -= step * dz;
                    }
                }
            }
        }
    }
    let n = rows.len().max(1) as f64;
    Network { dims, params, epochs_run: hp.epochs, final_loss: epoch_loss / n }
}

/// Smallest |pre-activation| over all hidden units and examples. A central
/// finite-difference probe of the loss is only trustworthy when no ReLU
/// kink sits within the probe step; callers verifying gradients should
/// demand a margin well above their step size.
pub fn min_abs_preactivation(dims: &Dims, params: &[f64], rows: &[&FeatureVector]) -> f64 {
    let lay = layout(dims);
    let mut min_abs = f64::INFINITY;
    for row in rows {
        let f = forward(dims, &lay, params, row);
        for z in f.z1.iter().chain(&f.z2) {
            min_abs = min_abs.min(z.abs());
        }
    }
    min_abs
}

/// Full-batch objective and exact analytic gradient at `params`: the mean
/// over examples of the per-example summed BCE. Layout matches
/// [`Network::params`].
pub fn loss_and_gradient(
    dims: &Dims,
    params: &[f64],
    rows: &[&FeatureVector],
    targets: &[Vec<u8>],
) -> (f64, Vec<f64>) {
    let lay = layout(dims);
    let n = rows.len();
    let scale = 1.0 / n as f64;
    let mut grad = vec![0.0; dims.n_params()];
    let mut total = 0.0;
    // Split the gradient buffer into per-layer views.
    let (gw1, rest) = grad.split_at_mut(lay.w1.end);
    let (gb1, rest) = rest.split_at_mut(dims.h1);
    let (gw2, rest) = rest.split_at_mut(dims.h1 * dims.h2);
    let (gb2, rest) = rest.split_at_mut(dims.h2);
    let (gw3, gb3) = rest.split_at_mut(dims.h2 * dims.output);

    for (row, y) in rows.iter().zip(targets) {
        let f = forward(dims, &lay, params, row);
        let (loss, dz1) = backward_example(
            dims, &f, y, scale, params, &lay, gw2, gb2, gw3, gb3, gb1,
        );
        total += loss;
        for &(j, v) in row.entries() {
            let col = &mut gw1[j * dims.h1..(j + 1) * dims.h1];
            for (g, dz) in col.iter_mut().zip(&dz1) {
                *g += dz * v;
            }
        }
    }
    (total * scale, grad)
}
