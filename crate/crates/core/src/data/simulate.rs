//! Data generators with known treatment-effect curves, used to validate the
//! estimators end to end.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{BinaryDataset, SurvivalDataset};
use crate::error::{CsteError, Result};
use crate::numkit::stats::logistic;
use crate::numkit::RngStream;

/// Generating parameters of the binary single-index design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryTruth {
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub g1: String,
    pub g2: String,
    pub covariance: String,
    pub truncation: [f64; 2],
    pub treatment_probability: f64,
}

impl BinaryTruth {
    /// True treatment-effect curve g1(u) = u (1 - u).
    pub fn g1(&self, u: f64) -> f64 {
        u * (1.0 - u)
    }

    pub fn g2(&self, u: f64) -> f64 {
        u.exp()
    }
}

/// Generating parameters of the multi-arm survival design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTruth {
    pub baseline_hazard: String,
    pub beta1: String,
    pub beta2: String,
    pub g: String,
    pub censoring_rate: String,
    pub arm_probabilities: [f64; 2],
}

impl SurvivalTruth {
    pub fn beta1(&self, x: f64) -> f64 {
        -1.0 - x.exp()
    }

    pub fn beta2(&self, x: f64) -> f64 {
        -x.exp()
    }

    /// Per-arm log hazard ratios at `x`.
    pub fn beta(&self, x: f64) -> Vec<f64> {
        vec![self.beta1(x), self.beta2(x)]
    }
}

/// X ~ N(0, 0.5^|i-j|) truncated to (-2, 2)^p, Z ~ Bernoulli(0.5),
/// logit mu = u1 (1 - u1) Z + exp(u2) with u_k = X'beta_k.
pub fn simulate_binary_dgp(n: usize, p: usize, seed: u64) -> Result<(BinaryDataset, BinaryTruth)> {
    if p < 3 {
        return Err(CsteError::Parameter(format!("p must be at least 3, got {p}")));
    }
    if n < 10 {
        return Err(CsteError::Parameter(format!("n must be at least 10, got {n}")));
    }
    let mut beta1 = vec![0.0; p];
    let mut beta2 = vec![0.0; p];
    for b in beta1.iter_mut().take(3) {
        *b = 1.0 / 3f64.sqrt();
    }
    beta2[0] = 1.0 / 5f64.sqrt();
    beta2[1] = -2.0 / 5f64.sqrt();

    let mut rng = RngStream::new(seed, 0);
    let rho: f64 = 0.5;
    let innov = (1.0 - rho * rho).sqrt();
    let mut x = Array2::zeros((n, p));
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut row = vec![0.0; p];
    for i in 0..n {
        // AR(1) recursion gives the 0.5^|i-j| covariance; reject whole draws
        loop {
            row[0] = rng.normal();
            for j in 1..p {
                row[j] = rho * row[j - 1] + innov * rng.normal();
            }
            if row.iter().all(|v| v.abs() < 2.0) {
                break;
            }
        }
        for j in 0..p {
            x[[i, j]] = row[j];
        }
        let zi = rng.bernoulli(0.5) as u8;
        let u1: f64 = row.iter().zip(&beta1).map(|(a, b)| a * b).sum();
        let u2: f64 = row.iter().zip(&beta2).map(|(a, b)| a * b).sum();
        let eta = u1 * (1.0 - u1) * zi as f64 + u2.exp();
        let yi = rng.bernoulli(logistic(eta)) as u8;
        z.push(zi);
        y.push(yi);
    }
    let data = BinaryDataset {
        y,
        z,
        x,
        column_names: (1..=p).map(|j| format!("X.{j}")).collect(),
        row_ids: (1..=n).map(|i| i.to_string()).collect(),
        outcome_name: "Y".into(),
        treatment_name: "Treat".into(),
        id_name: None,
    };
    let truth = BinaryTruth {
        beta1,
        beta2,
        g1: "u*(1-u)".into(),
        g2: "exp(u)".into(),
        covariance: "0.5^|i-j|".into(),
        truncation: [-2.0, 2.0],
        treatment_probability: 0.5,
    };
    Ok((data, truth))
}

/// X ~ U[0,1], Z1 ~ Bernoulli(0.3), Z2 = b (1 - Z1) with b ~ Bernoulli(0.5),
/// hazard 0.6 t^2 exp{beta1(X) Z1 + beta2(X) Z2 + X^2}, censoring ~ Exp(0.23 X).
pub fn simulate_survival_dgp(n: usize, seed: u64) -> Result<(SurvivalDataset, SurvivalTruth)> {
    if n < 20 {
        return Err(CsteError::Parameter(format!("n must be at least 20, got {n}")));
    }
    let truth = SurvivalTruth {
        baseline_hazard: "0.6*t^2".into(),
        beta1: "-1-exp(x)".into(),
        beta2: "-exp(x)".into(),
        g: "x^2".into(),
        censoring_rate: "0.23*x".into(),
        arm_probabilities: [0.3, 0.5],
    };
    let mut rng = RngStream::new(seed, 0);
    let mut time = Vec::with_capacity(n);
    let mut status = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut z = Array2::zeros((n, 2));
    for i in 0..n {
        let x = rng.uniform();
        let z1 = rng.bernoulli(0.3);
        let b = rng.bernoulli(0.5);
        let z2 = b && !z1;
        let eta = truth.beta1(x) * z1 as u8 as f64 + truth.beta2(x) * z2 as u8 as f64 + x * x;
        // cumulative hazard 0.2 t^3 exp(eta), inverted in closed form
        let t = (rng.exp1() / (0.2 * eta.exp())).cbrt();
        let rate = 0.23 * x;
        let c = if rate > 0.0 { rng.exp1() / rate } else { f64::INFINITY };
        time.push(t.min(c));
        status.push((t <= c) as u8);
        xs.push(x);
        z[[i, 0]] = z1 as u8 as f64;
        z[[i, 1]] = z2 as u8 as f64;
    }
    let data = SurvivalDataset {
        time,
        status,
        x: xs,
        z,
        treatment_labels: vec!["Treat1".into(), "Treat2".into()],
        row_ids: (1..=n).map(|i| i.to_string()).collect(),
        time_name: "time".into(),
        status_name: "status".into(),
        biomarker_name: "X".into(),
        id_name: None,
    };
    data.validate()?;
    Ok((data, truth))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_dimensions_and_levels() {
        let (d, truth) = simulate_binary_dgp(2000, 20, 7).unwrap();
        assert_eq!(d.x.dim(), (2000, 20));
        assert!(d.y.contains(&0) && d.y.contains(&1));
        assert!(d.x.iter().all(|v| v.abs() < 2.0));
        assert_eq!(truth.g1(0.0), 0.0);
        assert_eq!(truth.g1(1.0), 0.0);
        // binomial 99.9% interval half-width at n=2000 is ~0.037; 0.03 is ~2.7 sd
        let zbar = d.z.iter().map(|&v| v as f64).sum::<f64>() / 2000.0;
        assert!((zbar - 0.5).abs() < 0.03, "{zbar}");
        d.validate_for_fit().unwrap();
    }

    #[test]
    fn binary_rejects_small_p() {
        assert!(simulate_binary_dgp(100, 2, 1).is_err());
    }

    #[test]
    fn survival_arms_exclusive() {
        let (d, truth) = simulate_survival_dgp(100, 3).unwrap();
        assert_eq!(d.k(), 2);
        for row in d.z.rows() {
            assert!(row.sum() <= 1.0);
        }
        assert!((truth.beta1(0.5) - (-2.6487212707001282)).abs() < 1e-12);
    }

    #[test]
    fn survival_censoring_near_twenty_percent() {
        let (d, _) = simulate_survival_dgp(5000, 11).unwrap();
        let cens = d.status.iter().filter(|&&s| s == 0).count() as f64 / 5000.0;
        assert!((0.15..=0.25).contains(&cens), "{cens}");
    }

    #[test]
    fn seeds_reproduce_and_differ() {
        let a = simulate_binary_dgp(50, 4, 9).unwrap().0;
        let b = simulate_binary_dgp(50, 4, 9).unwrap().0;
        let c = simulate_binary_dgp(50, 4, 10).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
        let s1 = simulate_survival_dgp(40, 9).unwrap().0;
        let s2 = simulate_survival_dgp(40, 9).unwrap().0;
        let s3 = simulate_survival_dgp(40, 8).unwrap().0;
        assert_eq!(s1, s2);
        assert_ne!(s1, s3);
    }
}
