//! Dataset types, CSV ingestion, covariate normalization, treatment coding
//! and the two validation data generators.

mod csv_io;
mod encode;
mod normalize;
mod simulate;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CsteError, Result};

pub use csv_io::{parse_covariates, parse_csv, Schema};
pub use encode::{encode_treatment, sort_levels, TreatmentCoding};
pub use normalize::{normalize, NormalizationReport};
pub use simulate::{simulate_binary_dgp, simulate_survival_dgp, BinaryTruth, SurvivalTruth};

/// Two-arm data with a binary outcome and numeric covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryDataset {
    pub y: Vec<u8>,
    pub z: Vec<u8>,
    pub x: Array2<f64>,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
    pub outcome_name: String,
    pub treatment_name: String,
    /// Name of the id column, if one was declared.
    pub id_name: Option<String>,
}

impl BinaryDataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Checks the conditions a fit needs beyond cell-level validity.
    pub fn validate_for_fit(&self) -> Result<()> {
        if self.n() < 10 {
            return Err(CsteError::Input(format!(
                "need at least 10 observations, got {}",
                self.n()
            )));
        }
        if self.p() < 1 {
            return Err(CsteError::Input("need at least one covariate".into()));
        }
        for (name, v) in [(&self.outcome_name, &self.y), (&self.treatment_name, &self.z)] {
            let ones = v.iter().filter(|&&b| b == 1).count();
            if ones == 0 || ones == v.len() {
                return Err(CsteError::Input(format!(
                    "column \"{name}\" must contain both 0 and 1"
                )));
            }
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(CsteError::Input("covariates must be finite".into()));
        }
        Ok(())
    }

    /// Copy with z-scored covariates and the report needed to repeat the transform.
    pub fn normalized(&self) -> Result<(BinaryDataset, NormalizationReport)> {
        let (x, report) = normalize(&self.x, &self.column_names)?;
        let mut out = self.clone();
        out.x = x;
        Ok((out, report))
    }

    /// Keep only the named covariates, in the given order.
    pub fn select_covariates(&self, names: &[String]) -> Result<BinaryDataset> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column_names
                    .iter()
                    .position(|c| c == n)
                    .ok_or_else(|| CsteError::Schema(format!("unknown covariate \"{n}\"")))
            })
            .collect::<Result<_>>()?;
        let mut out = self.clone();
        out.x = self.x.select(ndarray::Axis(1), &idx);
        out.column_names = names.to_vec();
        Ok(out)
    }
}

/// Right-censored data with one biomarker and K treatment dummies (all-zero
/// row = reference arm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalDataset {
    pub time: Vec<f64>,
    pub status: Vec<u8>,
    pub x: Vec<f64>,
    pub z: Array2<f64>,
    pub treatment_labels: Vec<String>,
    pub row_ids: Vec<String>,
    pub time_name: String,
    pub status_name: String,
    pub biomarker_name: String,
    pub id_name: Option<String>,
}

impl SurvivalDataset {
    pub fn n(&self) -> usize {
        self.time.len()
    }

    /// Number of non-reference arms.
    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.status.len() != n || self.x.len() != n || self.z.nrows() != n {
            return Err(CsteError::Input("column lengths differ".into()));
        }
        if self.k() == 0 {
            return Err(CsteError::Input("need at least one treatment column".into()));
        }
        for i in 0..n {
            if !(self.time[i] > 0.0 && self.time[i].is_finite()) {
                return Err(CsteError::Cell {
                    row: i + 1,
                    column: self.time_name.clone(),
                    message: "time must be strictly positive".into(),
                });
            }
            let s: f64 = self.z.row(i).sum();
            if s > 1.0 {
                return Err(CsteError::Cell {
                    row: i + 1,
                    column: self.treatment_labels.join("+"),
                    message: "treatment dummies are not mutually exclusive".into(),
                });
            }
        }
        // every arm that has members needs at least one event
        let mut arms = vec![(0usize, 0usize); self.k() + 1];
        for i in 0..n {
            let arm = (0..self.k())
                .find(|&k| self.z[[i, k]] == 1.0)
                .map(|k| k + 1)
                .unwrap_or(0);
            arms[arm].0 += 1;
            arms[arm].1 += self.status[i] as usize;
        }
        for (a, &(members, events)) in arms.iter().enumerate() {
            if members > 0 && events == 0 {
                let label = if a == 0 {
                    "reference".to_string()
                } else {
                    self.treatment_labels[a - 1].clone()
                };
                return Err(CsteError::Input(format!(
                    "arm {label} has no observed events"
                )));
            }
        }
        Ok(())
    }
}

/// Covariates of new subjects, used for scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTable {
    pub x: Array2<f64>,
    pub column_names: Vec<String>,
    pub row_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Dataset {
    Binary(BinaryDataset),
    Survival(SurvivalDataset),
}

impl Dataset {
    pub fn n(&self) -> usize {
        match self {
            Dataset::Binary(d) => d.n(),
            Dataset::Survival(d) => d.n(),
        }
    }

    pub fn to_csv(&self) -> String {
        match self {
            Dataset::Binary(d) => csv_io::binary_to_csv(d),
            Dataset::Survival(d) => csv_io::survival_to_csv(d),
        }
    }

    pub fn as_binary(&self) -> Option<&BinaryDataset> {
        match self {
            Dataset::Binary(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_survival(&self) -> Option<&SurvivalDataset> {
        match self {
            Dataset::Survival(d) => Some(d),
            _ => None,
        }
    }
}
