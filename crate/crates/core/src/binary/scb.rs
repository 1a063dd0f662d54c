use ndarray::Array2;
use rayon::prelude::*;

use super::fit::BinaryCsteFit;
use super::sbk::{sbk_smooth, LocalLogitFit};
use crate::curve::{assemble, check_alpha, critical_value, multiplier_sup_statistics, CsteCurve};
use crate::data::BinaryDataset;
use crate::error::{CsteError, Result};
use crate::numkit::stats::{linspace, quantile};
use crate::numkit::Kernel;

#[derive(Debug, Clone)]
pub struct BinaryBandOptions {
    pub alpha: f64,
    /// `None` selects 1.06 sd(index) n^(-1/5).
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    pub n_boot: usize,
    pub seed: u64,
    pub grid_size: usize,
}

impl Default for BinaryBandOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            n_boot: 1000,
            seed: 1,
            grid_size: 100,
        }
    }
}

/// SBK estimate of g1 with a multiplier-bootstrap simultaneous band over the
/// central 95% of the index. Grid points where the local fit is undefined are
/// dropped and listed in `trimmed`.
pub fn scb_binary(
    fit: &BinaryCsteFit,
    data: &BinaryDataset,
    opts: &BinaryBandOptions,
) -> Result<CsteCurve> {
    check_alpha(opts.alpha)?;
    if opts.n_boot == 0 {
        return Err(CsteError::Parameter("n_boot must be positive".into()));
    }
    if opts.grid_size < 2 {
        return Err(CsteError::Parameter("grid_size must be at least 2".into()));
    }
    let sm = sbk_smooth(fit, data, opts.bandwidth, opts.kernel)?;
    let lo = quantile(sm.index(), 0.025);
    let hi = quantile(sm.index(), 0.975);
    if !(hi > lo) {
        return Err(CsteError::Input("index has no spread".into()));
    }
    let grid = linspace(lo, hi, opts.grid_size);
    let locals: Vec<Result<LocalLogitFit>> = grid.par_iter().map(|&u| sm.at(u)).collect();

    let mut trimmed = Vec::new();
    let mut kept = Vec::new();
    for (u, r) in grid.iter().zip(locals) {
        match r {
            Ok(lf) => kept.push(lf),
            Err(CsteError::InsufficientData { .. }) => trimmed.push(*u),
            Err(e) => return Err(e),
        }
    }
    if kept.len() < 2 {
        return Err(CsteError::InsufficientData {
            x0: lo,
            message: format!(
                "only {} of {} grid points have a defined local fit",
                kept.len(),
                grid.len()
            ),
        });
    }
    let n = data.n();
    let mut influence = Array2::zeros((kept.len(), n));
    for (j, lf) in kept.iter().enumerate() {
        for i in 0..n {
            influence[[j, i]] = lf.influence[i];
        }
    }
    let se: Vec<f64> = kept.iter().map(|lf| lf.se).collect();
    let sups = multiplier_sup_statistics(&influence, &se, opts.n_boot, opts.seed);
    let crit = critical_value(sups, opts.alpha);
    Ok(assemble(
        kept.iter().map(|lf| lf.u0).collect(),
        kept.iter().map(|lf| lf.estimate).collect(),
        se,
        crit,
        opts.alpha,
        sm.bandwidth,
        opts.n_boot,
        opts.seed,
        trimmed,
    ))
}
