use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::local::{fit_local, LocalFit};
use crate::data::SurvivalDataset;
use crate::error::{CsteError, Result};
use crate::numkit::kernel::rule_of_thumb_bandwidth;
use crate::numkit::stats::{linspace, quantile};
use crate::numkit::Kernel;

#[derive(Debug, Clone)]
pub struct SurvivalFitOptions {
    pub grid_size: usize,
    /// `None` selects 1.06 sd(X) n^(-1/5).
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    /// Weights on the K arm curves; `None` is only accepted when K = 1.
    pub contrast: Option<Vec<f64>>,
}

impl Default for SurvivalFitOptions {
    fn default() -> Self {
        Self {
            grid_size: 50,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            contrast: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub x0: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCsteFit {
    pub grid: Vec<f64>,
    pub local_fits: Vec<LocalFit>,
    pub bandwidth: f64,
    pub kernel: Kernel,
    pub contrast: Vec<f64>,
    /// l' delta_hat at each retained grid point.
    pub curve: Vec<f64>,
    /// Grid points dropped because the local fit failed there.
    pub failures: Vec<GridFailure>,
    pub treatment_labels: Vec<String>,
    pub n: usize,
}

pub(crate) fn check_contrast(contrast: Option<&[f64]>, k: usize) -> Result<Vec<f64>> {
    let l = match contrast {
        Some(l) => l.to_vec(),
        None if k == 1 => vec![1.0],
        None => {
            return Err(CsteError::Parameter(format!(
                "a contrast vector of length {k} is required with {k} treatment arms"
            )))
        }
    };
    if l.len() != k {
        return Err(CsteError::Parameter(format!(
            "contrast has length {} but the data have {k} treatment arms",
            l.len()
        )));
    }
    if l.iter().any(|v| !v.is_finite()) {
        return Err(CsteError::Parameter("contrast entries must be finite".into()));
    }
    if l.iter().all(|&v| v == 0.0) {
        return Err(CsteError::Parameter("contrast must not be all zeros".into()));
    }
    Ok(l)
}

/// Local fits on `grid_size` equispaced points over the 5%-95% quantiles of X.
pub fn fit_curve(data: &SurvivalDataset, opts: &SurvivalFitOptions) -> Result<SurvivalCsteFit> {
    data.validate()?;
    let contrast = check_contrast(opts.contrast.as_deref(), data.k())?;
    if opts.grid_size < 2 {
        return Err(CsteError::Parameter("grid_size must be at least 2".into()));
    }
    let h = opts
        .bandwidth
        .unwrap_or_else(|| rule_of_thumb_bandwidth(&data.x));
    if !(h > 0.0) || !h.is_finite() {
        return Err(CsteError::Parameter(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    let lo = quantile(&data.x, 0.05);
    let hi = quantile(&data.x, 0.95);
    if !(hi > lo) {
        return Err(CsteError::Input("biomarker has no spread".into()));
    }
    let grid = linspace(lo, hi, opts.grid_size);
    let results: Vec<Result<(LocalFit, f64)>> = grid
        .par_iter()
        .map(|&x0| {
            let lf = fit_local(data, x0, h, opts.kernel)?;
            let (est, _) = lf.contrast(&contrast)?;
            Ok((lf, est))
        })
        .collect();

    let mut local_fits = Vec::new();
    let mut curve = Vec::new();
    let mut kept_grid = Vec::new();
    let mut failures = Vec::new();
    for (&x0, r) in grid.iter().zip(results) {
        match r {
            Ok((lf, est)) => {
                kept_grid.push(x0);
                local_fits.push(lf);
                curve.push(est);
            }
            Err(e) if e.is_user_error() => return Err(e),
            Err(e) => failures.push(GridFailure {
                x0,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() * 5 >= grid.len() {
        return Err(CsteError::InsufficientData {
            x0: failures[0].x0,
            message: format!(
                "{} of {} grid points failed; first: {}",
                failures.len(),
                grid.len(),
                failures[0].message
            ),
        });
    }
    Ok(SurvivalCsteFit {
        grid: kept_grid,
        local_fits,
        bandwidth: h,
        kernel: opts.kernel,
        contrast,
        curve,
        failures,
        treatment_labels: data.treatment_labels.clone(),
        n: data.n(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::simulate_survival_dgp;

    #[test]
    fn coordinate_contrast_projects_delta() {
        let (d, _) = simulate_survival_dgp(300, 1).unwrap();
        let fit = fit_curve(
            &d,
            &SurvivalFitOptions {
                contrast: Some(vec![1.0, 0.0]),
                grid_size: 10,
                ..Default::default()
            },
        )
        .unwrap();
        for (c, lf) in fit.curve.iter().zip(&fit.local_fits) {
            assert_eq!(*c, lf.delta_hat[0]);
        }
        assert!(fit.grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn contrast_validation() {
        let (d, _) = simulate_survival_dgp(100, 1).unwrap();
        let bad = |l: Option<Vec<f64>>| {
            fit_curve(&d, &SurvivalFitOptions { contrast: l, ..Default::default() }).unwrap_err()
        };
        assert!(matches!(bad(None), CsteError::Parameter(_)));
        assert!(matches!(bad(Some(vec![0.0, 0.0])), CsteError::Parameter(_)));
        assert!(matches!(bad(Some(vec![1.0])), CsteError::Parameter(_)));
    }

    #[test]
    fn shifting_biomarker_shifts_grid_only() {
        let (d, _) = simulate_survival_dgp(200, 6).unwrap();
        let mut s = d.clone();
        s.x.iter_mut().for_each(|x| *x += 10.0);
        let o = SurvivalFitOptions {
            contrast: Some(vec![0.0, 1.0]),
            grid_size: 8,
            bandwidth: Some(0.25),
            ..Default::default()
        };
        let a = fit_curve(&d, &o).unwrap();
        let b = fit_curve(&s, &o).unwrap();
        assert_eq!(a.grid.len(), b.grid.len());
        for j in 0..a.grid.len() {
            assert!((a.grid[j] + 10.0 - b.grid[j]).abs() < 1e-9);
            assert!((a.curve[j] - b.curve[j]).abs() < 1e-6);
        }
    }
}
