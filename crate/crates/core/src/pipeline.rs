//! End-to-end fits with request/artifact types shared by the CLI and the
//! service.

use serde::{Deserialize, Serialize};

use crate::binary::{fit_binary, scb_binary, select_lambda, BinaryBandOptions, BinaryCsteFit, BinaryFitOptions};
use crate::curve::CsteCurve;
use crate::data::{BinaryDataset, CovariateTable, NormalizationReport, SurvivalDataset};
use crate::error::{CsteError, Result};
use crate::itr::{find_regions, predict_scores, recommend, Recommendation, RegionReport};
use crate::numkit::{Kernel, Penalty};
use crate::survival::{fit_curve, scb_survival, SurvivalBandOptions, SurvivalCsteFit, SurvivalFitOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    #[default]
    Scad,
    L1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BinaryRequest {
    pub knots: usize,
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub penalty: PenaltyKind,
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub grid_size: usize,
    /// Z-score the covariates before fitting (ignored when the data already are).
    pub normalize: bool,
}

impl Default for BinaryRequest {
    fn default() -> Self {
        Self {
            knots: 2,
            lambda: None,
            lambda_grid: None,
            penalty: PenaltyKind::Scad,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            alpha: 0.05,
            n_boot: 1000,
            seed: 1,
            grid_size: 100,
            normalize: false,
        }
    }
}

impl BinaryRequest {
    pub fn validate(&self) -> Result<()> {
        if self.lambda.is_some() && self.lambda_grid.is_some() {
            return Err(CsteError::Parameter(
                "lambda and lambda_grid are mutually exclusive".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CsteError::Parameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(CsteError::Parameter(format!("bandwidth must be positive, got {h}")));
            }
        }
        if self.n_boot == 0 {
            return Err(CsteError::Parameter("n_boot must be positive".into()));
        }
        if self.grid_size < 2 {
            return Err(CsteError::Parameter("grid_size must be at least 2".into()));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(CsteError::Parameter(format!("lambda must be non-negative, got {l}")));
            }
        }
        Ok(())
    }

    fn penalty(&self, lambda: f64) -> Penalty {
        match self.penalty {
            PenaltyKind::Scad => Penalty::scad(lambda),
            PenaltyKind::L1 => Penalty::L1 { lambda },
        }
    }
}

/// One row of the tuning path, without the full fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub bic: Option<f64>,
    pub df: Option<usize>,
    pub active_set: Option<Vec<usize>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryArtifact {
    pub fit: BinaryCsteFit,
    pub lambda_path: Option<Vec<LambdaSummary>>,
    pub selected_lambda: f64,
    pub request: BinaryRequest,
    pub outcome: String,
    pub treatment: String,
    pub id_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryOutcome {
    pub artifact: BinaryArtifact,
    pub curve: CsteCurve,
    pub regions: RegionReport,
}

/// Fit (or tune), smooth and band a binary-outcome CSTE curve.
///
/// `normalization` is the report of a dataset that was z-scored upstream.
pub fn run_binary(
    data: &BinaryDataset,
    normalization: Option<&NormalizationReport>,
    req: &BinaryRequest,
) -> Result<BinaryOutcome> {
    req.validate()?;
    let (data, normalization) = match normalization {
        Some(r) => (data.clone(), Some(r.clone())),
        None if req.normalize => {
            let (d, r) = data.normalized()?;
            (d, Some(r))
        }
        None => (data.clone(), None),
    };
    let base = BinaryFitOptions {
        knots: req.knots,
        penalty: req.penalty(req.lambda.unwrap_or(0.0)),
        ..Default::default()
    };
    let (mut fit, lambda_path) = match &req.lambda_grid {
        Some(grid) => {
            let path = select_lambda(&data, grid, &base)?;
            let summary = path
                .entries
                .iter()
                .map(|e| LambdaSummary {
                    lambda: e.lambda,
                    bic: e.bic,
                    df: e.fit.as_ref().map(|f| f.df),
                    active_set: e.fit.as_ref().map(|f| f.active_set.clone()),
                    error: e.error.clone(),
                })
                .collect();
            (path.selected_fit().clone(), Some(summary))
        }
        None => (fit_binary(&data, &base)?, None),
    };
    fit.normalization = normalization;
    let curve = scb_binary(
        &fit,
        &data,
        &BinaryBandOptions {
            alpha: req.alpha,
            bandwidth: req.bandwidth,
            kernel: req.kernel,
            n_boot: req.n_boot,
            seed: req.seed,
            grid_size: req.grid_size,
        },
    )?;
    let regions = find_regions(&curve);
    Ok(BinaryOutcome {
        artifact: BinaryArtifact {
            selected_lambda: fit.lambda,
            fit,
            lambda_path,
            request: req.clone(),
            outcome: data.outcome_name.clone(),
            treatment: data.treatment_name.clone(),
            id_column: data.id_name.clone(),
        },
        curve,
        regions,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurvivalRequest {
    /// Required when there is more than one treatment arm.
    pub contrast: Option<Vec<f64>>,
    pub bandwidth: Option<f64>,
    pub kernel: Kernel,
    pub alpha: f64,
    pub n_resample: usize,
    pub seed: u64,
    pub grid_size: usize,
}

impl Default for SurvivalRequest {
    fn default() -> Self {
        Self {
            contrast: None,
            bandwidth: None,
            kernel: Kernel::Epanechnikov,
            alpha: 0.05,
            n_resample: 1000,
            seed: 1,
            grid_size: 50,
        }
    }
}

impl SurvivalRequest {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(CsteError::Parameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if let Some(h) = self.bandwidth {
            if !(h > 0.0) || !h.is_finite() {
                return Err(CsteError::Parameter(format!("bandwidth must be positive, got {h}")));
            }
        }
        if self.n_resample == 0 {
            return Err(CsteError::Parameter("n_resample must be positive".into()));
        }
        if self.grid_size < 2 {
            return Err(CsteError::Parameter("grid_size must be at least 2".into()));
        }
        if let Some(l) = &self.contrast {
            if l.iter().all(|&v| v == 0.0) {
                return Err(CsteError::Parameter("contrast must not be all zeros".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalArtifact {
    pub fit: SurvivalCsteFit,
    pub request: SurvivalRequest,
    pub time: String,
    pub status: String,
    pub biomarker: String,
    pub id_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalOutcome {
    pub artifact: SurvivalArtifact,
    pub curve: CsteCurve,
    pub regions: RegionReport,
}

pub fn run_survival(data: &SurvivalDataset, req: &SurvivalRequest) -> Result<SurvivalOutcome> {
    req.validate()?;
    let fit = fit_curve(
        data,
        &SurvivalFitOptions {
            grid_size: req.grid_size,
            bandwidth: req.bandwidth,
            kernel: req.kernel,
            contrast: req.contrast.clone(),
        },
    )?;
    let curve = scb_survival(
        &fit,
        &SurvivalBandOptions {
            alpha: req.alpha,
            n_resample: req.n_resample,
            seed: req.seed,
        },
    )?;
    let regions = find_regions(&curve);
    Ok(SurvivalOutcome {
        artifact: SurvivalArtifact {
            fit,
            request: req.clone(),
            time: data.time_name.clone(),
            status: data.status_name.clone(),
            biomarker: data.biomarker_name.clone(),
            id_column: data.id_name.clone(),
        },
        curve,
        regions,
    })
}

/// Either kind of fit, as stored in `fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitArtifact {
    Binary(Box<BinaryArtifact>),
    Survival(Box<SurvivalArtifact>),
}

impl FitArtifact {
    /// Covariate columns new subjects must supply.
    pub fn score_columns(&self) -> Vec<String> {
        match self {
            FitArtifact::Binary(b) => b.fit.column_names.clone(),
            FitArtifact::Survival(s) => vec![s.biomarker.clone()],
        }
    }

    pub fn id_column(&self) -> Option<&String> {
        match self {
            FitArtifact::Binary(b) => b.id_column.as_ref(),
            FitArtifact::Survival(s) => s.id_column.as_ref(),
        }
    }

    /// Scores of new subjects: x'beta1 for binary fits, the biomarker for survival fits.
    pub fn scores(&self, table: &CovariateTable) -> Result<Vec<(String, f64)>> {
        match self {
            FitArtifact::Binary(b) => predict_scores(&b.fit, table, None),
            FitArtifact::Survival(_) => {
                if table.x.ncols() != 1 {
                    return Err(CsteError::Schema("expected a single biomarker column".into()));
                }
                Ok(table.row_ids.iter().cloned().zip(table.x.column(0).iter().copied()).collect())
            }
        }
    }
}

/// Scores, regions and advice for new subjects, sorted by score then id.
pub fn predict(
    artifact: &FitArtifact,
    regions: &RegionReport,
    table: &CovariateTable,
    outcome_harmful: bool,
) -> Result<Vec<Recommendation>> {
    let scores = artifact.scores(table)?;
    let mut recs = recommend(&scores, regions, outcome_harmful);
    crate::export::sort_recommendations(&mut recs);
    Ok(recs)
}

/// `from, from + by, ..., to` (inclusive up to rounding).
pub fn lambda_sequence(from: f64, to: f64, by: f64) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && by.is_finite()) || by <= 0.0 || to < from || from < 0.0 {
        return Err(CsteError::Parameter(format!(
            "invalid lambda grid {from}..{to} by {by}"
        )));
    }
    let steps = ((to - from) / by + 1e-9).floor() as usize;
    if steps > 10_000 {
        return Err(CsteError::Parameter("lambda grid has too many points".into()));
    }
    // round away the accumulated binary noise so 0.001 * 3 prints as 0.003
    Ok((0..=steps)
        .map(|i| {
            let v = from + i as f64 * by;
            (v * 1e12).round() / 1e12
        })
        .collect())
}
