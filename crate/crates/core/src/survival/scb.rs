use ndarray::{Array1, Array2};

use super::curve::SurvivalCsteFit;
use crate::curve::{assemble, check_alpha, critical_value, multiplier_sup_statistics, CsteCurve};
use crate::error::{CsteError, Result};

#[derive(Debug, Clone)]
pub struct SurvivalBandOptions {
    pub alpha: f64,
    pub n_resample: usize,
    pub seed: u64,
}

impl Default for SurvivalBandOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_resample: 1000,
            seed: 1,
        }
    }
}

/// Simultaneous band for `l' beta(x)` from normal-multiplier perturbations
/// of the subjects' local score contributions, linearized through the local
/// information.
pub fn scb_survival(fit: &SurvivalCsteFit, opts: &SurvivalBandOptions) -> Result<CsteCurve> {
    check_alpha(opts.alpha)?;
    if opts.n_resample == 0 {
        return Err(CsteError::Parameter("n_resample must be positive".into()));
    }
    let l = Array1::from(fit.contrast.clone());
    let mut rows = Vec::new();
    let mut trimmed: Vec<f64> = fit.failures.iter().map(|f| f.x0).collect();
    for (j, lf) in fit.local_fits.iter().enumerate() {
        let infl = lf.delta_influence.dot(&l);
        let se = infl.dot(&infl).sqrt();
        if se > 0.0 && se.is_finite() {
            rows.push((j, infl, se));
        } else {
            trimmed.push(lf.x0);
        }
    }
    if rows.len() < 2 {
        return Err(CsteError::InsufficientData {
            x0: fit.grid.first().copied().unwrap_or(f64::NAN),
            message: format!("only {} grid points have a usable band", rows.len()),
        });
    }
    trimmed.sort_by(f64::total_cmp);
    let mut influence = Array2::zeros((rows.len(), fit.n));
    for (r, (_, infl, _)) in rows.iter().enumerate() {
        influence.row_mut(r).assign(infl);
    }
    let se: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let sups = multiplier_sup_statistics(&influence, &se, opts.n_resample, opts.seed);
    let crit = critical_value(sups, opts.alpha);
    Ok(assemble(
        rows.iter().map(|r| fit.grid[r.0]).collect(),
        rows.iter().map(|r| fit.curve[r.0]).collect(),
        se,
        crit,
        opts.alpha,
        fit.bandwidth,
        opts.n_resample,
        opts.seed,
        trimmed,
    ))
}
