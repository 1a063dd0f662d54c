use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{CsteError, Result};
use crate::numkit::linalg::inverse_spd;
use crate::numkit::{kernel_weight, newton_maximize, Kernel, NewtonOptions, SmoothObjective};

/// Local partial-likelihood estimate at one biomarker value `x0`.
///
/// Parameters are ordered `(delta_1..K, gamma_1..K, d)`: `delta = beta(x0)`,
/// `gamma = beta'(x0)`, `d = g'(x0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalFit {
    pub x0: f64,
    pub delta_hat: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub d_hat: f64,
    /// Negative Hessian over the identified parameters, embedded in the full
    /// (2K+1) square with zero rows/columns for non-identified arms.
    pub information: Array2<f64>,
    /// Sum of K((X_i - x0)/h) / K(0).
    pub effective_n: f64,
    /// Events with positive kernel weight.
    pub events: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Arms with at least one weighted event; the others are held at zero.
    pub identified: Vec<bool>,
    /// Local log partial likelihood after each Newton step.
    pub loglik_trace: Vec<f64>,
    /// n x K: subject i's linearized contribution to `delta_hat`.
    #[serde(skip)]
    pub delta_influence: Array2<f64>,
}

impl LocalFit {
    pub fn k(&self) -> usize {
        self.delta_hat.len()
    }

    /// l' delta_hat and its standard error from the score contributions.
    pub fn contrast(&self, l: &[f64]) -> Result<(f64, f64)> {
        for (k, &lk) in l.iter().enumerate() {
            if lk != 0.0 && !self.identified[k] {
                return Err(CsteError::InsufficientData {
                    x0: self.x0,
                    message: format!("arm {} has no weighted events", k + 1),
                });
            }
        }
        let est = l.iter().zip(&self.delta_hat).map(|(a, b)| a * b).sum();
        let infl = self.delta_influence.dot(&Array1::from(l.to_vec()));
        Ok((est, infl.dot(&infl).sqrt()))
    }
}

/// Kernel-weighted partial likelihood over the subjects with positive weight,
/// in a free parameter vector mapped onto the identified coordinates.
struct LocalLikelihood {
    /// Subjects sorted by decreasing time.
    time: Vec<f64>,
    status: Vec<bool>,
    w: Vec<f64>,
    /// Covariates v_i restricted to the free coordinates.
    v: Array2<f64>,
}

impl LocalLikelihood {
    /// Accumulates value, gradient, Hessian and (optionally) per-subject
    /// event scores `Delta_i w_i (v_i - vbar(Y_i))`.
    fn evaluate(
        &self,
        theta: &Array1<f64>,
        want_hess: bool,
        mut scores: Option<&mut Array2<f64>>,
    ) -> (f64, Array1<f64>, Array2<f64>) {
        let m = self.time.len();
        let q = theta.len();
        let eta = self.v.dot(theta);
        // risk-set sums are stabilized by the largest linear predictor
        let shift = eta.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut s0 = 0.0;
        let mut s1 = Array1::<f64>::zeros(q);
        let mut s2 = Array2::<f64>::zeros(if want_hess { (q, q) } else { (0, 0) });
        let mut value = 0.0;
        let mut grad = Array1::zeros(q);
        let mut hess = Array2::zeros((q, q));
        let mut i = 0;
        while i < m {
            // everyone tied at this time joins the risk set before any event is scored
            let t = self.time[i];
            let mut end = i;
            while end < m && self.time[end] == t {
                let r = self.w[end] * (eta[end] - shift).exp();
                let vi = self.v.row(end);
                s0 += r;
                s1.scaled_add(r, &vi);
                if want_hess {
                    for a in 0..q {
                        for b in 0..=a {
                            s2[[a, b]] += r * vi[a] * vi[b];
                        }
                    }
                }
                end += 1;
            }
            let vbar = &s1 / s0;
            for j in i..end {
                if !self.status[j] {
                    continue;
                }
                let wj = self.w[j];
                value += wj * (eta[j] - shift - s0.ln());
                let diff = &self.v.row(j) - &vbar;
                grad.scaled_add(wj, &diff);
                if let Some(sc) = scores.as_deref_mut() {
                    for a in 0..q {
                        sc[[j, a]] = wj * diff[a];
                    }
                }
                if want_hess {
                    for a in 0..q {
                        for b in 0..=a {
                            hess[[a, b]] -= wj * (s2[[a, b]] / s0 - vbar[a] * vbar[b]);
                        }
                    }
                }
            }
            i = end;
        }
        for a in 0..q {
            for b in 0..a {
                hess[[b, a]] = hess[[a, b]];
            }
        }
        (value, grad, hess)
    }
}

impl SmoothObjective for LocalLikelihood {
    fn value(&self, theta: &Array1<f64>) -> f64 {
        self.evaluate(theta, false, None).0
    }

    fn derivatives(&self, theta: &Array1<f64>) -> (f64, Array1<f64>, Array2<f64>) {
        self.evaluate(theta, true, None)
    }
}

/// Maximize the local log partial likelihood at `x0` (Breslow ties).
pub fn fit_local(data: &SurvivalDataset, x0: f64, h: f64, kernel: Kernel) -> Result<LocalFit> {
    let n = data.n();
    let k = data.k();
    let k0 = kernel.density(0.0);
    let mut rows = Vec::new();
    let mut weights = Vec::new();
    let mut effective_n = 0.0;
    let mut events = 0;
    let mut arm_events = vec![0usize; k];
    // K_h(u) = K(u/h)/h; the 1/h factor cancels from the estimating equations
    // and is dropped to keep the objective on a bandwidth-free scale
    kernel_weight(0.0, h, kernel)?;
    for i in 0..n {
        let w = kernel.density((data.x[i] - x0) / h);
        if w > 0.0 {
            rows.push(i);
            weights.push(w);
            effective_n += w / k0;
            if data.status[i] == 1 {
                events += 1;
                for a in 0..k {
                    if data.z[[i, a]] == 1.0 {
                        arm_events[a] += 1;
                    }
                }
            }
        }
    }
    if events < 2 {
        return Err(CsteError::InsufficientData {
            x0,
            message: format!("{events} events with positive kernel weight; at least 2 are needed"),
        });
    }
    let identified: Vec<bool> = arm_events.iter().map(|&e| e > 0).collect();
    // free coordinates: identified deltas, their gammas, then d
    let mut free: Vec<usize> = (0..k).filter(|&a| identified[a]).collect();
    free.extend((0..k).filter(|&a| identified[a]).map(|a| k + a));
    free.push(2 * k);
    let full_dim = 2 * k + 1;

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| data.time[rows[b]].total_cmp(&data.time[rows[a]]));
    let m = rows.len();
    let mut v = Array2::zeros((m, free.len()));
    let mut time = Vec::with_capacity(m);
    let mut status = Vec::with_capacity(m);
    let mut w = Vec::with_capacity(m);
    let mut subject = Vec::with_capacity(m);
    for (r, &o) in order.iter().enumerate() {
        let i = rows[o];
        let dx = data.x[i] - x0;
        for (c, &f) in free.iter().enumerate() {
            v[[r, c]] = if f < k {
                data.z[[i, f]]
            } else if f < 2 * k {
                data.z[[i, f - k]] * dx
            } else {
                dx
            };
        }
        time.push(data.time[i]);
        status.push(data.status[i] == 1);
        w.push(weights[o]);
        subject.push(i);
    }
    let lik = LocalLikelihood { time, status, w, v };
    let res = newton_maximize(&lik, Array1::zeros(free.len()), &NewtonOptions::default())?;
    if res.argmax.iter().any(|t| !t.is_finite()) {
        return Err(CsteError::Numerical(format!(
            "local partial likelihood diverged at x0 = {x0}"
        )));
    }
    let mut scores = Array2::zeros((m, free.len()));
    let (_, _, hess) = lik.evaluate(&res.argmax, true, Some(&mut scores));
    let info_free = -hess;
    let inv = inverse_spd(&info_free).ok_or_else(|| CsteError::InsufficientData {
        x0,
        message: "local information matrix is singular".into(),
    })?;

    let mut theta = vec![0.0; full_dim];
    let mut information = Array2::zeros((full_dim, full_dim));
    for (a, &fa) in free.iter().enumerate() {
        theta[fa] = res.argmax[a];
        for (b, &fb) in free.iter().enumerate() {
            information[[fa, fb]] = info_free[[a, b]];
        }
    }
    // delta rows of I^{-1} applied to each subject's score
    let lin = scores.dot(&inv);
    let mut delta_influence = Array2::zeros((n, k));
    for (c, &f) in free.iter().enumerate() {
        if f < k {
            for r in 0..m {
                delta_influence[[subject[r], f]] = lin[[r, c]];
            }
        }
    }
    Ok(LocalFit {
        x0,
        delta_hat: theta[..k].to_vec(),
        gamma_hat: theta[k..2 * k].to_vec(),
        d_hat: theta[2 * k],
        information,
        effective_n,
        events,
        converged: res.converged,
        iterations: res.iterations,
        identified,
        loglik_trace: res.trace,
        delta_influence,
    })
}
