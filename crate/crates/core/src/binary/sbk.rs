//! Spline-backfitted kernel re-estimation of g1.

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use super::fit::BinaryCsteFit;
use super::logistic::LogisticDesign;
use crate::data::BinaryDataset;
use crate::error::{CsteError, Result};
use crate::numkit::kernel::rule_of_thumb_bandwidth;
use crate::numkit::linalg::inverse_spd;
use crate::numkit::stats::logistic;
use crate::numkit::{newton_maximize, Kernel, NewtonOptions};

/// Minimum kernel-weighted count of treated subjects (in units of K(0)).
pub const MIN_EFFECTIVE_N: f64 = 5.0;

/// Local-linear logistic fit of g1 at one index value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLogitFit {
    pub u0: f64,
    pub estimate: f64,
    pub slope: f64,
    /// Negative Hessian of the local log-likelihood in (a, b).
    pub information: [[f64; 2]; 2],
    /// Sum over treated subjects of K((u - u0)/h) / K(0).
    pub effective_n: f64,
    /// Sandwich standard error of `estimate`.
    pub se: f64,
    /// Per-subject linearized contribution to `estimate`; `se` is its l2 norm.
    #[serde(skip)]
    pub influence: Vec<f64>,
}

/// Evaluator of the SBK estimate of g1, holding the spline-stage offsets.
#[derive(Debug, Clone)]
pub struct SbkSmoother {
    u1: Vec<f64>,
    offset: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    fit: BinaryCsteFit,
    pub bandwidth: f64,
    pub kernel: Kernel,
}

/// Prepare SBK smoothing of g1. `bandwidth = None` uses 1.06 sd(index) n^(-1/5).
pub fn sbk_smooth(
    fit: &BinaryCsteFit,
    data: &BinaryDataset,
    bandwidth: Option<f64>,
    kernel: Kernel,
) -> Result<SbkSmoother> {
    if data.p() != fit.beta1.len() {
        return Err(CsteError::Input(format!(
            "fit has {} covariates but data has {}",
            fit.beta1.len(),
            data.p()
        )));
    }
    let u1 = fit.index1(&data.x);
    let u2 = fit.index2(&data.x);
    let h = bandwidth.unwrap_or_else(|| rule_of_thumb_bandwidth(&u1));
    if !(h > 0.0) || !h.is_finite() {
        return Err(CsteError::Parameter(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    Ok(SbkSmoother {
        offset: u2.iter().map(|&u| fit.g2(u)).collect(),
        u1,
        y: data.y.iter().map(|&v| v as f64).collect(),
        z: data.z.iter().map(|&v| v as f64).collect(),
        fit: fit.clone(),
        bandwidth: h,
        kernel,
    })
}

impl SbkSmoother {
    /// Index values x'beta1 of the training subjects.
    pub fn index(&self) -> &[f64] {
        &self.u1
    }

    pub fn n(&self) -> usize {
        self.u1.len()
    }

    /// Local fit at `u0`; `InsufficientData` when the treated stratum is too thin there.
    pub fn at(&self, u0: f64) -> Result<LocalLogitFit> {
        let n = self.n();
        let k0 = self.kernel.density(0.0);
        let mut w = vec![0.0; n];
        let mut eff = 0.0;
        // K(u/h) without the 1/h factor, which cancels from the local fit
        for i in 0..n {
            w[i] = self.kernel.density((self.u1[i] - u0) / self.bandwidth);
            if self.z[i] == 1.0 {
                eff += w[i] / k0;
            }
        }
        if eff < MIN_EFFECTIVE_N {
            return Err(CsteError::InsufficientData {
                x0: u0,
                message: format!(
                    "effective treated sample {eff:.2} below {MIN_EFFECTIVE_N} in the kernel window"
                ),
            });
        }
        // only rows with positive weight matter; Z = 0 rows have a zero design row
        let rows: Vec<usize> = (0..n).filter(|&i| w[i] > 0.0 && self.z[i] == 1.0).collect();
        let m = rows.len();
        let mut design = Array2::zeros((m, 2));
        let mut y = Vec::with_capacity(m);
        let mut off = Vec::with_capacity(m);
        let mut wt = Vec::with_capacity(m);
        for (r, &i) in rows.iter().enumerate() {
            design[[r, 0]] = 1.0;
            design[[r, 1]] = self.u1[i] - u0;
            y.push(self.y[i]);
            off.push(self.offset[i]);
            wt.push(w[i]);
        }
        let obj = LogisticDesign {
            design: &design,
            y: &y,
            offset: Some(&off),
            weights: Some(&wt),
            ridge: 0.0,
        };
        let start = array![self.fit.g1(u0), 0.0];
        let res = newton_maximize(&obj, start, &NewtonOptions::default())?;
        let (a, b) = (res.argmax[0], res.argmax[1]);
        if !res.converged || !a.is_finite() || a.abs() > 30.0 {
            return Err(CsteError::InsufficientData {
                x0: u0,
                message: "local logistic fit did not converge".into(),
            });
        }
        let mut info = Array2::<f64>::zeros((2, 2));
        let mut score = Vec::with_capacity(m);
        for (r, &i) in rows.iter().enumerate() {
            let d = design[[r, 1]];
            let mu = logistic(a + b * d + off[r]);
            let c = wt[r] * mu * (1.0 - mu);
            info[[0, 0]] += c;
            info[[0, 1]] += c * d;
            info[[1, 1]] += c * d * d;
            score.push((i, wt[r] * (self.y[i] - mu), d));
        }
        info[[1, 0]] = info[[0, 1]];
        let inv = inverse_spd(&info).ok_or_else(|| CsteError::InsufficientData {
            x0: u0,
            message: "local information matrix is singular".into(),
        })?;
        let mut influence = vec![0.0; n];
        for (i, r, d) in score {
            influence[i] = (inv[[0, 0]] + inv[[0, 1]] * d) * r;
        }
        let se = influence.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(se > 0.0) || !se.is_finite() {
            return Err(CsteError::InsufficientData {
                x0: u0,
                message: "degenerate local standard error".into(),
            });
        }
        Ok(LocalLogitFit {
            u0,
            estimate: a,
            slope: b,
            information: [[info[[0, 0]], info[[0, 1]]], [info[[1, 0]], info[[1, 1]]]],
            effective_n: eff,
            se,
            influence,
        })
    }

    /// SBK estimate of g1 at `u0`.
    pub fn g1(&self, u0: f64) -> Result<f64> {
        self.at(u0).map(|f| f.estimate)
    }

    /// The spline-stage fit this smoother refines.
    pub fn pilot(&self) -> &BinaryCsteFit {
        &self.fit
    }
}
