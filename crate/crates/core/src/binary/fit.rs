use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::logistic::LogisticDesign;
use crate::data::{BinaryDataset, NormalizationReport};
use crate::error::{CsteError, Result};
use crate::numkit::stats::logistic;
use crate::numkit::{
    bspline_basis, bspline_basis_derivative, newton_maximize, KnotVector, NewtonOptions, Penalty,
};

/// Ridge on the spline coefficients. Negligible next to the information of
/// any populated basis function, it keeps coefficients finite when a tail of
/// the index is quasi-separated (all outcomes equal).
const SPLINE_RIDGE: f64 = 1e-3;

/// A fitted probability is treated as pinned beyond this linear predictor.
const PINNED_ETA: f64 = 15.0;

#[derive(Debug, Clone)]
pub struct BinaryFitOptions {
    /// Interior knots per index function.
    pub knots: usize,
    pub degree: usize,
    /// Penalty on the index coefficients; lambda = 0 disables it.
    pub penalty: Penalty,
    /// Stop when the objective gains less than this over one outer iteration.
    pub tol: f64,
    pub max_outer: usize,
    /// Starting `(beta1, beta2)`; defaults to a main-effects logistic fit.
    pub init: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for BinaryFitOptions {
    fn default() -> Self {
        Self {
            knots: 2,
            degree: 3,
            penalty: Penalty::scad(0.0),
            tol: 1e-6,
            max_outer: 200,
            init: None,
        }
    }
}

impl BinaryFitOptions {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            penalty: Penalty::scad(lambda),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    /// Norm of the violation of the penalized stationarity conditions in beta.
    pub grad_norm: f64,
    pub converged: bool,
    /// True when the last outer step could not improve the objective at any step length.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryCsteFit {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub theta1: Vec<f64>,
    pub theta2: Vec<f64>,
    pub knots1: KnotVector,
    pub knots2: KnotVector,
    pub loglik: f64,
    /// Profile log-likelihood (including the small spline ridge) minus
    /// n * sum of penalties; the quantity being maximized.
    pub objective: f64,
    pub bic: f64,
    pub df: usize,
    pub lambda: f64,
    pub penalty: Penalty,
    /// Indices of nonzero beta1 entries.
    pub active_set: Vec<usize>,
    /// Indices of nonzero beta2 entries.
    pub active_set2: Vec<usize>,
    pub n: usize,
    pub column_names: Vec<String>,
    pub convergence: Convergence,
    /// Objective after every outer iteration of the final stage.
    pub objective_trace: Vec<f64>,
    /// Transform applied to the covariates before fitting, if any; scoring
    /// new subjects repeats it.
    #[serde(default)]
    pub normalization: Option<NormalizationReport>,
}

impl BinaryCsteFit {
    /// Spline-stage g1 at `u` (clamped into the knot range).
    pub fn g1(&self, u: f64) -> f64 {
        eval_spline(&self.knots1, &self.theta1, u)
    }

    pub fn g2(&self, u: f64) -> f64 {
        eval_spline(&self.knots2, &self.theta2, u)
    }

    /// x'beta1 for every row of `x`.
    pub fn index1(&self, x: &Array2<f64>) -> Vec<f64> {
        x.dot(&Array1::from(self.beta1.clone())).to_vec()
    }

    pub fn index2(&self, x: &Array2<f64>) -> Vec<f64> {
        x.dot(&Array1::from(self.beta2.clone())).to_vec()
    }

    /// Fitted logit of P(Y = 1) for each row.
    pub fn linear_predictor(&self, data: &BinaryDataset) -> Vec<f64> {
        let u1 = self.index1(&data.x);
        let u2 = self.index2(&data.x);
        (0..data.n())
            .map(|i| self.g1(u1[i]) * data.z[i] as f64 + self.g2(u2[i]))
            .collect()
    }
}

fn eval_spline(knots: &KnotVector, theta: &[f64], u: f64) -> f64 {
    let b = bspline_basis(knots.clamp(u), knots).expect("clamped argument");
    b.iter().zip(theta).map(|(a, c)| a * c).sum()
}

fn eval_spline_derivative(knots: &KnotVector, theta: &[f64], u: f64) -> f64 {
    let b = bspline_basis_derivative(knots.clamp(u), knots).expect("clamped argument");
    b.iter().zip(theta).map(|(a, c)| a * c).sum()
}

/// Unit l2 norm with the first nonzero entry positive. `None` for a zero vector.
pub(crate) fn normalize_direction(v: &[f64]) -> Option<Vec<f64>> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return None;
    }
    let sign = v
        .iter()
        .find(|a| **a != 0.0)
        .map_or(1.0, |a| a.signum());
    Some(v.iter().map(|a| sign * a / norm).collect())
}

/// Spline stage: logistic fit of (theta1, theta2) for fixed indices.
#[derive(Debug, Clone)]
struct SplineStage {
    knots1: KnotVector,
    knots2: KnotVector,
    theta: Array1<f64>,
    loglik: f64,
    /// Ridge-penalized log-likelihood actually maximized over theta.
    profile: f64,
}

impl SplineStage {
    fn q1(&self) -> usize {
        self.knots1.dim()
    }
}

struct Problem<'a> {
    data: &'a BinaryDataset,
    y: Vec<f64>,
    z: Vec<f64>,
    n_knots: usize,
    degree: usize,
}

impl<'a> Problem<'a> {
    fn new(data: &'a BinaryDataset, opts: &BinaryFitOptions) -> Self {
        Self {
            data,
            y: data.y.iter().map(|&v| v as f64).collect(),
            z: data.z.iter().map(|&v| v as f64).collect(),
            n_knots: opts.knots,
            degree: opts.degree,
        }
    }

    fn n(&self) -> usize {
        self.data.n()
    }

    fn indices(&self, beta1: &[f64], beta2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let x = &self.data.x;
        (
            x.dot(&Array1::from(beta1.to_vec())).to_vec(),
            x.dot(&Array1::from(beta2.to_vec())).to_vec(),
        )
    }

    fn spline_stage(
        &self,
        beta1: &[f64],
        beta2: &[f64],
        warm: Option<&Array1<f64>>,
    ) -> Result<SplineStage> {
        let (u1, u2) = self.indices(beta1, beta2);
        let knots1 = KnotVector::from_quantiles(&u1, self.n_knots, self.degree)?;
        let knots2 = KnotVector::from_quantiles(&u2, self.n_knots, self.degree)?;
        let (q1, q2) = (knots1.dim(), knots2.dim());
        let n = self.n();
        let mut design = Array2::zeros((n, q1 + q2));
        for i in 0..n {
            let b1 = bspline_basis(knots1.clamp(u1[i]), &knots1)?;
            let b2 = bspline_basis(knots2.clamp(u2[i]), &knots2)?;
            for j in 0..q1 {
                design[[i, j]] = b1[j] * self.z[i];
            }
            for j in 0..q2 {
                design[[i, q1 + j]] = b2[j];
            }
        }
        let obj = LogisticDesign {
            design: &design,
            y: &self.y,
            offset: None,
            weights: None,
            ridge: SPLINE_RIDGE,
        };
        let opts = NewtonOptions {
            tol: 1e-8,
            max_iter: 100,
            ..Default::default()
        };
        let start = warm
            .filter(|w| w.len() == q1 + q2)
            .cloned()
            .unwrap_or_else(|| Array1::zeros(q1 + q2));
        let mut res = newton_maximize(&obj, start, &opts)?;
        if !res.converged && warm.is_some() {
            res = newton_maximize(&obj, Array1::zeros(q1 + q2), &opts)?;
        }
        let eta = obj.eta(&res.argmax);
        let pinned = eta.iter().filter(|e| e.abs() > PINNED_ETA).count();
        if !res.converged {
            return Err(CsteError::Separation(format!(
                "spline logistic fit did not converge (iterations {}, gradient norm {:.3e})",
                res.iterations, res.grad_norm
            )));
        }
        if 2 * pinned > n {
            return Err(CsteError::Separation(format!(
                "{pinned} of {n} fitted probabilities are pinned at 0 or 1"
            )));
        }
        let loglik = res.value + 0.5 * SPLINE_RIDGE * res.argmax.dot(&res.argmax);
        Ok(SplineStage {
            knots1,
            knots2,
            theta: res.argmax,
            loglik,
            profile: res.value,
        })
    }

    fn penalty_total(&self, penalty: &Penalty, beta1: &[f64], beta2: &[f64]) -> f64 {
        if penalty.lambda() == 0.0 {
            return 0.0;
        }
        let s: f64 = beta1.iter().chain(beta2).map(|b| penalty.value(b.abs())).sum();
        self.n() as f64 * s
    }

    /// Score and Fisher information of the log-likelihood in (beta1, beta2) at fixed splines.
    fn beta_derivatives(
        &self,
        beta1: &[f64],
        beta2: &[f64],
        stage: &SplineStage,
    ) -> (Array1<f64>, Array2<f64>) {
        let p = self.data.p();
        let n = self.n();
        let (u1, u2) = self.indices(beta1, beta2);
        let q1 = stage.q1();
        let th1 = stage.theta.slice(ndarray::s![..q1]).to_vec();
        let th2 = stage.theta.slice(ndarray::s![q1..]).to_vec();
        let mut jac = Array2::zeros((n, 2 * p));
        let mut resid = Array1::zeros(n);
        let mut curv = Array1::zeros(n);
        for i in 0..n {
            let g1 = eval_spline(&stage.knots1, &th1, u1[i]);
            let g2 = eval_spline(&stage.knots2, &th2, u2[i]);
            let d1 = eval_spline_derivative(&stage.knots1, &th1, u1[i]) * self.z[i];
            let d2 = eval_spline_derivative(&stage.knots2, &th2, u2[i]);
            let mu = logistic(g1 * self.z[i] + g2);
            resid[i] = self.y[i] - mu;
            curv[i] = mu * (1.0 - mu);
            for j in 0..p {
                let xij = self.data.x[[i, j]];
                jac[[i, j]] = d1 * xij;
                jac[[i, p + j]] = d2 * xij;
            }
        }
        let grad = jac.t().dot(&resid);
        let weighted = &jac * &curv.insert_axis(ndarray::Axis(1));
        let info = jac.t().dot(&weighted);
        (grad, info)
    }
}

/// Maximize `g.d - d'Fd/2 - n sum w_j |b0_j + d_j|` over `b = b0 + d` by
/// cyclic coordinate descent with soft-thresholding.
fn weighted_l1_newton(
    b0: &[f64],
    grad: &Array1<f64>,
    info: &Array2<f64>,
    thresholds: &[f64],
) -> Vec<f64> {
    let d = b0.len();
    let ridge = 1e-10 * (0..d).map(|j| info[[j, j]]).fold(0.0, f64::max).max(1e-12);
    let mut b = b0.to_vec();
    let mut delta = vec![0.0; d];
    // F * delta, kept up to date incrementally
    let mut f_delta = vec![0.0; d];
    for _sweep in 0..2000 {
        let mut max_change = 0.0f64;
        for j in 0..d {
            let fjj = info[[j, j]] + ridge;
            let a = grad[j] - (f_delta[j] - info[[j, j]] * delta[j]);
            let c = fjj * b0[j] + a;
            let t = thresholds[j];
            let new_b = if c > t {
                (c - t) / fjj
            } else if c < -t {
                (c + t) / fjj
            } else {
                0.0
            };
            let change = new_b - b[j];
            if change != 0.0 {
                for k in 0..d {
                    f_delta[k] += info[[k, j]] * change;
                }
                b[j] = new_b;
                delta[j] = new_b - b0[j];
                max_change = max_change.max(change.abs());
            }
        }
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        if max_change <= 1e-12 * scale {
            break;
        }
    }
    b
}

fn active(beta: &[f64]) -> Vec<usize> {
    beta.iter()
        .enumerate()
        .filter(|(_, b)| **b != 0.0)
        .map(|(j, _)| j)
        .collect()
}

struct StageOutcome {
    beta1: Vec<f64>,
    beta2: Vec<f64>,
    stage: SplineStage,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    stalled: bool,
}

/// Damped proximal-Newton ascent of loglik - n sum pen(|beta|). The penalty
/// is linearized at the current iterate (`fixed_weights` overrides that with
/// constant L1 weights).
fn ascend(
    prob: &Problem<'_>,
    penalty: &Penalty,
    mut beta1: Vec<f64>,
    mut beta2: Vec<f64>,
    mut stage: SplineStage,
    tol: f64,
    max_outer: usize,
) -> Result<StageOutcome> {
    let p = prob.data.p();
    let n = prob.n() as f64;
    let mut objective = stage.profile - prob.penalty_total(penalty, &beta1, &beta2);
    let mut trace = vec![objective];
    let mut converged = false;
    let mut stalled = false;
    let mut iterations = 0;

    for _ in 0..max_outer {
        iterations += 1;
        let (grad, info) = prob.beta_derivatives(&beta1, &beta2, &stage);
        let b0: Vec<f64> = beta1.iter().chain(&beta2).copied().collect();
        let thresholds: Vec<f64> = b0.iter().map(|b| n * penalty.derivative(b.abs())).collect();
        let target = weighted_l1_newton(&b0, &grad, &info, &thresholds);

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let cand: Vec<f64> = b0
                .iter()
                .zip(&target)
                .map(|(a, t)| a + step * (t - a))
                .collect();
            if let (Some(c1), Some(c2)) =
                (normalize_direction(&cand[..p]), normalize_direction(&cand[p..]))
            {
                if let Ok(st) = prob.spline_stage(&c1, &c2, Some(&stage.theta)) {
                    let obj = st.profile - prob.penalty_total(penalty, &c1, &c2);
                    if obj.is_finite() && obj >= objective {
                        accepted = Some((c1, c2, st, obj));
                        break;
                    }
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((c1, c2, st, obj)) => {
                let gain = obj - objective;
                beta1 = c1;
                beta2 = c2;
                stage = st;
                objective = obj;
                trace.push(obj);
                if gain < tol {
                    converged = true;
                    break;
                }
            }
            None => {
                stalled = true;
                converged = true;
                break;
            }
        }
    }
    Ok(StageOutcome {
        beta1,
        beta2,
        stage,
        trace,
        iterations,
        converged,
        stalled,
    })
}

/// Main-effects logistic regression on [1, Z, X, Z*X]; interaction slopes
/// give the beta1 direction and main slopes the beta2 direction.
fn main_effects_init(prob: &Problem<'_>) -> (Vec<f64>, Vec<f64>) {
    let n = prob.n();
    let p = prob.data.p();
    let mut design = Array2::zeros((n, 2 + 2 * p));
    for i in 0..n {
        design[[i, 0]] = 1.0;
        design[[i, 1]] = prob.z[i];
        for j in 0..p {
            let x = prob.data.x[[i, j]];
            design[[i, 2 + j]] = x;
            design[[i, 2 + p + j]] = x * prob.z[i];
        }
    }
    let obj = LogisticDesign {
        design: &design,
        y: &prob.y,
        offset: None,
        weights: None,
        ridge: 0.0,
    };
    let mut e1 = vec![0.0; p];
    e1[0] = 1.0;
    let fallback = (e1.clone(), e1);
    match newton_maximize(&obj, Array1::zeros(2 + 2 * p), &NewtonOptions::default()) {
        Ok(res) => {
            let main = res.argmax.slice(ndarray::s![2..2 + p]).to_vec();
            let inter = res.argmax.slice(ndarray::s![2 + p..]).to_vec();
            (
                normalize_direction(&inter).unwrap_or_else(|| fallback.0.clone()),
                normalize_direction(&main).unwrap_or(fallback.1),
            )
        }
        Err(_) => fallback,
    }
}

/// Penalized maximum-likelihood fit of the single-index logit model.
pub fn fit_binary(data: &BinaryDataset, opts: &BinaryFitOptions) -> Result<BinaryCsteFit> {
    data.validate_for_fit()?;
    let lambda = opts.penalty.lambda();
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(CsteError::Parameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    if let Penalty::Scad { a, .. } = opts.penalty {
        if !(a > 2.0) {
            return Err(CsteError::Parameter(format!("SCAD a must exceed 2, got {a}")));
        }
    }
    if opts.knots == 0 && opts.degree == 0 {
        return Err(CsteError::Parameter("spline basis would be constant".into()));
    }
    let p = data.p();
    if p == 1 && lambda > 0.0 {
        return Err(CsteError::Parameter(
            "a single covariate cannot be penalized under the unit-norm constraint".into(),
        ));
    }
    let prob = Problem::new(data, opts);

    let (beta1, beta2, stage, trace, iterations, converged, stalled) = if p == 1 {
        let b = vec![1.0];
        let stage = prob.spline_stage(&b, &b, None)?;
        let trace = vec![stage.profile];
        (b.clone(), b, stage, trace, 0, true, false)
    } else {
        let (b1, b2) = match &opts.init {
            Some((b1, b2)) => {
                if b1.len() != p || b2.len() != p {
                    return Err(CsteError::Parameter(format!(
                        "initial coefficients must have length {p}"
                    )));
                }
                (
                    normalize_direction(b1)
                        .ok_or_else(|| CsteError::Parameter("initial beta1 is zero".into()))?,
                    normalize_direction(b2)
                        .ok_or_else(|| CsteError::Parameter("initial beta2 is zero".into()))?,
                )
            }
            None => main_effects_init(&prob),
        };
        let stage = prob.spline_stage(&b1, &b2, None)?;
        let out = match opts.penalty {
            // folded-concave penalties start from the L1 solution at the same lambda
            Penalty::Scad { .. } if lambda > 0.0 => {
                let l1 = Penalty::L1 { lambda };
                let warm = ascend(&prob, &l1, b1, b2, stage, opts.tol, opts.max_outer)?;
                ascend(
                    &prob,
                    &opts.penalty,
                    warm.beta1,
                    warm.beta2,
                    warm.stage,
                    opts.tol,
                    opts.max_outer,
                )?
            }
            _ => ascend(&prob, &opts.penalty, b1, b2, stage, opts.tol, opts.max_outer)?,
        };
        (
            out.beta1,
            out.beta2,
            out.stage,
            out.trace,
            out.iterations,
            out.converged,
            out.stalled,
        )
    };

    let grad_norm = if p == 1 {
        0.0
    } else {
        let (g, _) = prob.beta_derivatives(&beta1, &beta2, &stage);
        let n = data.n() as f64;
        beta1
            .iter()
            .chain(&beta2)
            .enumerate()
            .map(|(j, b)| {
                let w = n * opts.penalty.derivative(b.abs());
                let v = if *b != 0.0 {
                    g[j] - w * b.signum()
                } else {
                    (g[j].abs() - w).max(0.0)
                };
                v * v
            })
            .sum::<f64>()
            .sqrt()
    };

    let q1 = stage.q1();
    let theta1 = stage.theta.slice(ndarray::s![..q1]).to_vec();
    let theta2 = stage.theta.slice(ndarray::s![q1..]).to_vec();
    let active_set = active(&beta1);
    let active_set2 = active(&beta2);
    let df = active_set.len() + active_set2.len() + theta1.len() + theta2.len();
    let n = data.n() as f64;
    let loglik = stage.loglik;
    if !loglik.is_finite() {
        return Err(CsteError::Numerical("log-likelihood is not finite".into()));
    }
    let objective = stage.profile - prob.penalty_total(&opts.penalty, &beta1, &beta2);
    Ok(BinaryCsteFit {
        beta1,
        beta2,
        theta1,
        theta2,
        knots1: stage.knots1,
        knots2: stage.knots2,
        loglik,
        objective,
        bic: -2.0 * loglik + df as f64 * n.ln(),
        df,
        lambda,
        penalty: opts.penalty,
        active_set,
        active_set2,
        n: data.n(),
        column_names: data.column_names.clone(),
        convergence: Convergence {
            iterations,
            grad_norm,
            converged,
            stalled,
        },
        objective_trace: trace,
        normalization: None,
    })
}
