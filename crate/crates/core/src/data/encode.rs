use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CsteError, Result};

/// Dummy coding of a categorical treatment column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentCoding {
    /// n x (L - 1) indicators; the reference level is the all-zero row.
    pub dummies: Array2<f64>,
    /// Level represented by each dummy column.
    pub labels: Vec<String>,
    pub reference: String,
    pub levels: Vec<String>,
}

/// Distinct levels, ordered numerically when every level parses as a number.
pub fn sort_levels(raw: &[String]) -> Vec<String> {
    let mut levels: Vec<String> = raw.to_vec();
    levels.sort();
    levels.dedup();
    let numeric: Option<Vec<f64>> = levels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(vals) = numeric {
        let mut pairs: Vec<(f64, String)> = vals.into_iter().zip(levels).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().map(|(_, l)| l).collect()
    } else {
        levels
    }
}

/// Dummy-code `raw` against `reference` (default: the highest level).
pub fn encode_treatment(raw: &[String], reference: Option<&str>) -> Result<TreatmentCoding> {
    let levels = sort_levels(raw);
    if levels.len() < 2 {
        return Err(CsteError::Input(format!(
            "treatment needs at least 2 levels, found {}",
            levels.len()
        )));
    }
    let reference = match reference {
        Some(r) => {
            let r = r.trim();
            levels
                .iter()
                .find(|l| l.as_str() == r || matches!((l.parse::<f64>(), r.parse::<f64>()), (Ok(a), Ok(b)) if a == b))
                .cloned()
                .ok_or_else(|| {
                    CsteError::Input(format!(
                        "reference level {r:?} not among levels {levels:?}"
                    ))
                })?
        }
        None => levels[levels.len() - 1].clone(),
    };
    let labels: Vec<String> = levels.iter().filter(|l| **l != reference).cloned().collect();
    let mut dummies = Array2::zeros((raw.len(), labels.len()));
    for (i, v) in raw.iter().enumerate() {
        if let Some(k) = labels.iter().position(|l| l == v) {
            dummies[[i, k]] = 1.0;
        }
    }
    Ok(TreatmentCoding {
        dummies,
        labels,
        reference,
        levels,
    })
}
