//! Limited-memory BFGS with a weak-Wolfe bisection line search.
//!
//! Every accepted step satisfies the Armijo sufficient-decrease condition,
//! so the loss sequence is non-increasing; the curvature condition keeps
//! the stored (s, y) pairs well scaled. Armijo-only backtracking stalls on
//! ill-conditioned objectives because the initial inverse-Hessian scale
//! never recovers from one aggressive backtrack.

use std::collections::VecDeque;

/// Result of an L-BFGS run. `loss_history` holds the objective at the start
/// point and after every accepted step.
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub loss: f64,
    pub iterations: usize,
    pub loss_history: Vec<f64>,
}

const ARMIJO_C1: f64 = 1e-4;
const WOLFE_C2: f64 = 0.9;
const MAX_LINE_SEARCH: usize = 60;
const CURVATURE_EPS: f64 = 1e-12;

/// Outcome of one weak-Wolfe line search along a descent direction.
struct LineSearch {
    loss: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
}

/// Lewis-Overton bisection: shrink on an Armijo failure, grow on a
/// curvature failure, accept when both hold. Falls back to the last point
/// that satisfied Armijo alone; returns None when no sufficient-decrease
/// point was found at all.
fn weak_wolfe_search<F>(
    f: &F,
    x: &[f64],
    loss0: f64,
    direction: &[f64],
    slope: f64,
) -> Option<LineSearch>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x.len();
    let mut step = 1.0;
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut x_new = vec![0.0; n];
    let mut grad_new = vec![0.0; n];
    let mut fallback: Option<LineSearch> = None;

    for _ in 0..MAX_LINE_SEARCH {
        for i in 0..n {
            x_new[i] = x[i] + step * direction[i];
        }
        let loss_new = f(&x_new, &mut grad_new);
        if loss_new > loss0 + ARMIJO_C1 * step * slope {
            hi = step;
        } else if dot(&grad_new, direction) < WOLFE_C2 * slope {
            fallback = Some(LineSearch {
                loss: loss_new,
                x: x_new.clone(),
                grad: grad_new.clone(),
            });
            lo = step;
        } else {
            return Some(LineSearch { loss: loss_new, x: x_new, grad: grad_new });
        }
        step = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * lo };
        if step <= 1e-20 || (hi.is_finite() && hi - lo <= f64::EPSILON * hi) {
            break;
        }
    }
    fallback
}

/// Minimizes `f`, which must write the gradient at `x` into its second
/// argument and return the objective value.
pub fn minimize<F>(
    f: F,
    x0: Vec<f64>,
    memory: usize,
    max_iter: usize,
    grad_tol: f64,
) -> LbfgsResult
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut loss = f(&x, &mut grad);
    let mut history = vec![loss];

    let mut s_list: VecDeque<Vec<f64>> = VecDeque::with_capacity(memory);
    let mut y_list: VecDeque<Vec<f64>> = VecDeque::with_capacity(memory);
    let mut rho_list: VecDeque<f64> = VecDeque::with_capacity(memory);

    let mut iterations = 0;
    for _ in 0..max_iter {
        if norm2(&grad) < grad_tol {
            break;
        }
        let mut direction = two_loop_direction(&grad, &s_list, &y_list, &rho_list);
        let mut slope = dot(&grad, &direction);
        if slope >= 0.0 {
            // Curvature information went stale; fall back to steepest descent.
            direction = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
            if slope == 0.0 {
                break;
            }
        }

        let Some(found) = weak_wolfe_search(&f, &x, loss, &direction, slope) else {
            break;
        };

        let s: Vec<f64> = found.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = found.grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_EPS {
            if s_list.len() == memory {
                s_list.pop_front();
                y_list.pop_front();
                rho_list.pop_front();
            }
            rho_list.push_back(1.0 / sy);
            s_list.push_back(s);
            y_list.push_back(y);
        }
        x = found.x;
        grad = found.grad;
        loss = found.loss;
        history.push(loss);
        iterations += 1;
    }

    LbfgsResult { x, loss, iterations, loss_history: history }
}

/// Two-loop recursion producing `-H * grad` with the implicit inverse
/// Hessian approximation.
fn two_loop_direction(
    grad: &[f64],
    s_list: &VecDeque<Vec<f64>>,
    y_list: &VecDeque<Vec<f64>>,
    rho_list: &VecDeque<f64>,
) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let m = s_list.len();
    let mut alphas = vec![0.0; m];
    for i in (0..m).rev() {
        let alpha = rho_list[i] * dot(&s_list[i], &q);
        alphas[i] = alpha;
        for (qv, yv) in q.iter_mut().zip(&y_list[i]) {
            *qv -= alpha * yv;
        }
    }
    if let (Some(s), Some(y)) = (s_list.back(), y_list.back()) {
        let gamma = dot(s, y) / dot(y, y);
        for qv in q.iter_mut() {
            *qv *= gamma;
        }
    }
    for i in 0..m {
        let beta = rho_list[i] * dot(&y_list[i], &q);
        for (qv, sv) in q.iter_mut().zip(&s_list[i]) {
            *qv += (alphas[i] - beta) * sv;
        }
    }
    for qv in q.iter_mut() {
        *qv = -*qv;
    }
    q
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}
