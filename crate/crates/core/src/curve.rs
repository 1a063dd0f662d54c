//! The banded treatment-effect curve shared by both outcome types, plus the
//! multiplier machinery that produces its critical value.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CsteError, Result};
use crate::numkit::stats::quantile_sorted;
use crate::numkit::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsteCurve {
    /// Index values (binary) or biomarker values (survival), strictly increasing.
    pub grid: Vec<f64>,
    pub estimate: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Pointwise standard errors.
    pub se: Vec<f64>,
    pub alpha: f64,
    pub bandwidth: f64,
    /// (1 - alpha) quantile of the sup-t statistic.
    pub critical_value: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Grid abscissae dropped because the local estimate was undefined there.
    #[serde(default)]
    pub trimmed: Vec<f64>,
}

impl CsteCurve {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.grid.len();
        if [self.estimate.len(), self.lower.len(), self.upper.len()]
            .iter()
            .any(|&l| l != m)
        {
            return Err(CsteError::Input("curve arrays differ in length".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CsteError::Parameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CsteError::Input("curve grid is not strictly increasing".into()));
        }
        for j in 0..m {
            if !(self.lower[j] <= self.estimate[j] && self.estimate[j] <= self.upper[j]) {
                return Err(CsteError::Input(format!(
                    "band does not contain the estimate at grid point {j}"
                )));
            }
        }
        Ok(())
    }

    /// Whether lower <= estimate <= upper everywhere.
    pub fn contains_estimate(&self) -> bool {
        (0..self.len()).all(|j| self.lower[j] <= self.estimate[j] && self.estimate[j] <= self.upper[j])
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(CsteError::Parameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

/// Sup-t statistics of `n_boot` multiplier replicates.
///
/// Row `j` of `influence` holds each subject's linearized contribution to the
/// estimate at grid point `j`. Replicate `b` draws i.i.d. standard normal
/// weights from stream `(seed, b)` and records `max_j |influence_j . xi| / se_j`.
pub(crate) fn multiplier_sup_statistics(
    influence: &Array2<f64>,
    se: &[f64],
    n_boot: usize,
    seed: u64,
) -> Vec<f64> {
    let n = influence.ncols();
    (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(seed, b as u64);
            let xi = Array1::from(rng.normals(n));
            let dev = influence.dot(&xi);
            dev.iter()
                .zip(se)
                .map(|(d, s)| d.abs() / s)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// (1 - alpha) quantile of the sup statistics.
pub(crate) fn critical_value(mut sups: Vec<f64>, alpha: f64) -> f64 {
    if sups.is_empty() {
        return f64::NAN;
    }
    sups.sort_by(f64::total_cmp);
    quantile_sorted(&sups, 1.0 - alpha)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    grid: Vec<f64>,
    estimate: Vec<f64>,
    se: Vec<f64>,
    crit: f64,
    alpha: f64,
    bandwidth: f64,
    replicates: usize,
    seed: u64,
    trimmed: Vec<f64>,
) -> CsteCurve {
    let lower = estimate.iter().zip(&se).map(|(e, s)| e - crit * s).collect();
    let upper = estimate.iter().zip(&se).map(|(e, s)| e + crit * s).collect();
    CsteCurve {
        grid,
        estimate,
        lower,
        upper,
        se,
        alpha,
        bandwidth,
        critical_value: crit,
        replicates,
        seed,
        trimmed,
    }
}
