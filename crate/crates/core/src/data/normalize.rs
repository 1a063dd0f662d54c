use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CsteError, Result};
use crate::numkit::stats::{mean, sample_sd};

/// Column means and sample standard deviations used for z-scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationReport {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl NormalizationReport {
    /// Apply the stored transform to new rows with the same column order.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.means.len() {
            return Err(CsteError::Input(format!(
                "expected {} columns, got {}",
                self.means.len(),
                x.ncols()
            )));
        }
        let mut out = x.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| (v - self.means[j]) / self.sds[j]);
        }
        Ok(out)
    }
}

/// Z-score every column to mean 0 and sample sd 1.
pub fn normalize(x: &Array2<f64>, names: &[String]) -> Result<(Array2<f64>, NormalizationReport)> {
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for (j, col) in x.columns().into_iter().enumerate() {
        let v = col.to_vec();
        let m = mean(&v);
        let sd = sample_sd(&v);
        if !(sd > 0.0) || !sd.is_finite() {
            let name = names.get(j).cloned().unwrap_or_else(|| format!("#{}", j + 1));
            return Err(CsteError::Input(format!(
                "column \"{name}\" has zero variance and cannot be normalized"
            )));
        }
        means.push(m);
        sds.push(sd);
    }
    let report = NormalizationReport {
        columns: names.to_vec(),
        means,
        sds,
    };
    let out = report.apply(x)?;
    Ok((out, report))
}
