use serde::{Deserialize, Serialize};

use super::fit::{fit_binary, BinaryCsteFit, BinaryFitOptions};
use crate::data::BinaryDataset;
use crate::error::{CsteError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub lambda: f64,
    pub bic: Option<f64>,
    pub fit: Option<BinaryCsteFit>,
    /// Why the fit failed, when it did.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub entries: Vec<LambdaEntry>,
    /// Index of the BIC minimizer (smallest lambda on ties).
    pub selected: usize,
}

impl LambdaPath {
    pub fn selected_fit(&self) -> &BinaryCsteFit {
        self.entries[self.selected]
            .fit
            .as_ref()
            .expect("selected entry has a fit")
    }

    pub fn selected_lambda(&self) -> f64 {
        self.entries[self.selected].lambda
    }
}

/// Fit every lambda in an increasing grid, warm-starting each fit from the
/// previous successful one, and pick the BIC minimizer.
pub fn select_lambda(
    data: &BinaryDataset,
    lambda_grid: &[f64],
    base: &BinaryFitOptions,
) -> Result<LambdaPath> {
    if lambda_grid.is_empty() {
        return Err(CsteError::Parameter("lambda grid is empty".into()));
    }
    if lambda_grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(CsteError::Parameter("lambda values must be non-negative".into()));
    }
    if lambda_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CsteError::Parameter("lambda grid must be strictly increasing".into()));
    }
    let mut entries = Vec::with_capacity(lambda_grid.len());
    let mut warm = base.init.clone();
    for &lambda in lambda_grid {
        let opts = BinaryFitOptions {
            penalty: base.penalty.with_lambda(lambda),
            init: warm.clone(),
            ..base.clone()
        };
        match fit_binary(data, &opts) {
            Ok(fit) => {
                if fit.beta1.len() > 1 {
                    warm = Some((fit.beta1.clone(), fit.beta2.clone()));
                }
                entries.push(LambdaEntry {
                    lambda,
                    bic: Some(fit.bic),
                    fit: Some(fit),
                    error: None,
                });
            }
            Err(e) => entries.push(LambdaEntry {
                lambda,
                bic: None,
                fit: None,
                error: Some(e.to_string()),
            }),
        }
    }
    let mut selected: Option<usize> = None;
    for (k, e) in entries.iter().enumerate() {
        if let Some(b) = e.bic {
            if selected.is_none_or(|s| b < entries[s].bic.unwrap()) {
                selected = Some(k);
            }
        }
    }
    match selected {
        Some(selected) => Ok(LambdaPath { entries, selected }),
        None => Err(CsteError::Numerical(format!(
            "every lambda failed; first error: {}",
            entries[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}
