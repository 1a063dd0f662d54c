//! Damped Newton ascent with Levenberg-style ridge fallback.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::linalg::solve_spd;
use crate::error::{CsteError, Result};

/// A twice-differentiable objective to be maximized.
pub trait SmoothObjective {
    fn value(&self, x: &Array1<f64>) -> f64;

    /// Value, gradient and Hessian at `x`.
    fn derivatives(&self, x: &Array1<f64>) -> (f64, Array1<f64>, Array2<f64>);
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub max_ridge_inflations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
            max_ridge_inflations: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonResult {
    pub argmax: Array1<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective value after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
}

fn norm(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Maximize `objective` from `init`.
///
/// Each iteration solves `(-H + r I) s = g`, halving the step until the
/// objective does not decrease. When 30 halvings fail the ridge `r` is
/// inflated tenfold (up to 8 times) before giving up with `converged = false`.
pub fn newton_maximize<O: SmoothObjective + ?Sized>(
    objective: &O,
    init: Array1<f64>,
    opts: &NewtonOptions,
) -> Result<NewtonResult> {
    let mut x = init;
    let f0 = objective.value(&x);
    if !f0.is_finite() {
        return Err(CsteError::Input(
            "objective is not finite at the initial point".into(),
        ));
    }
    let mut trace = vec![f0];
    let mut grad_norm = f64::NAN;
    let dim = x.len();

    for iter in 0..opts.max_iter {
        let (f, g, h) = objective.derivatives(&x);
        grad_norm = norm(&g);
        if !grad_norm.is_finite() {
            return Err(CsteError::Numerical("non-finite gradient".into()));
        }
        if grad_norm <= opts.tol {
            return Ok(NewtonResult {
                argmax: x,
                value: f,
                converged: true,
                iterations: iter,
                grad_norm,
                trace,
            });
        }
        let neg_h = h.mapv(|v| -v);
        let scale = (0..dim).map(|i| neg_h[[i, i]].abs()).fold(0.0, f64::max).max(1e-12);
        let mut ridge = 0.0;
        let mut accepted: Option<(Array1<f64>, f64)> = None;
        let mut flat = false;

        'ridge: for _ in 0..=opts.max_ridge_inflations {
            let mut a = neg_h.clone();
            for i in 0..dim {
                a[[i, i]] += ridge;
            }
            // rounds spent reaching a positive-definite system count as inflations
            let step = match solve_spd(&a, &g) {
                Some(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => {
                    ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
                    continue 'ridge;
                }
            };
            let decrement = g.dot(&step);
            if decrement.abs() <= 1e-14 * f.abs().max(1.0) {
                flat = true;
                break 'ridge;
            }
            let mut t = 1.0;
            for _ in 0..=opts.max_halvings {
                let cand = &x + &(&step * t);
                let fc = objective.value(&cand);
                if fc.is_finite() && fc >= f {
                    accepted = Some((cand, fc));
                    break 'ridge;
                }
                t *= 0.5;
            }
            ridge = if ridge == 0.0 { 1e-8 * scale } else { ridge * 10.0 };
        }

        if flat {
            // No further ascent is representable in floating point.
            return Ok(NewtonResult {
                argmax: x,
                value: f,
                converged: true,
                iterations: iter,
                grad_norm,
                trace,
            });
        }
        match accepted {
            Some((cand, fc)) => {
                x = cand;
                trace.push(fc);
            }
            None => {
                return Ok(NewtonResult {
                    argmax: x,
                    value: f,
                    converged: false,
                    iterations: iter,
                    grad_norm,
                    trace,
                });
            }
        }
    }

    let value = objective.value(&x);
    let converged = if opts.max_iter == 0 {
        false
    } else {
        let (_, g, _) = objective.derivatives(&x);
        grad_norm = norm(&g);
        grad_norm <= opts.tol
    };
    Ok(NewtonResult {
        argmax: x,
        value,
        converged,
        iterations: opts.max_iter,
        grad_norm,
        trace,
    })
}
