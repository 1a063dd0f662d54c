//! Python bindings: datasets, both fitting pipelines and prediction.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use cste_core::data::{self, parse_covariates, parse_csv, NormalizationReport, Schema};
use cste_core::error::CsteError;
use cste_core::export;
use cste_core::itr::RegionReport;
use cste_core::curve::CsteCurve;
use cste_core::pipeline::{self, BinaryRequest, FitArtifact, SurvivalRequest};

fn to_py(e: CsteError) -> PyErr {
    if e.is_user_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Parsed and validated study data.
#[pyclass(module = "cste", skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    inner: data::Dataset,
}

#[pymethods]
impl Dataset {
    #[staticmethod]
    #[pyo3(signature = (csv, outcome, treatment, covariates, id=None))]
    fn binary(
        csv: &str,
        outcome: String,
        treatment: String,
        covariates: Vec<String>,
        id: Option<String>,
    ) -> PyResult<Self> {
        let schema = Schema::Binary { outcome, treatment, covariates, id };
        Ok(Dataset { inner: parse_csv(csv, &schema).map_err(to_py)? })
    }

    #[staticmethod]
    #[pyo3(signature = (csv, time, status, biomarker, treatment=None, reference=None, treatments=None, id=None))]
    #[allow(clippy::too_many_arguments)]
    fn survival(
        csv: &str,
        time: String,
        status: String,
        biomarker: String,
        treatment: Option<String>,
        reference: Option<String>,
        treatments: Option<Vec<String>>,
        id: Option<String>,
    ) -> PyResult<Self> {
        let schema = Schema::Survival { time, status, biomarker, treatment, reference, treatments, id };
        Ok(Dataset { inner: parse_csv(csv, &schema).map_err(to_py)? })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        match self.inner {
            data::Dataset::Binary(_) => "binary",
            data::Dataset::Survival(_) => "survival",
        }
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(kind={}, n={})", self.kind(), self.n())
    }
}

#[pyclass(module = "cste", get_all, skip_from_py_object)]
#[derive(Clone)]
struct Recommendation {
    id: String,
    score: f64,
    region: String,
    advice: String,
}

#[pymethods]
impl Recommendation {
    fn __repr__(&self) -> String {
        format!(
            "Recommendation(id={:?}, score={}, region={}, advice={})",
            self.id, self.score, self.region, self.advice
        )
    }
}

/// A fitted curve with its band, regions and the artifact needed to score new subjects.
#[pyclass(module = "cste")]
struct Fit {
    artifact: FitArtifact,
    curve: CsteCurve,
    regions: RegionReport,
}

#[pymethods]
impl Fit {
    #[getter]
    fn kind(&self) -> &'static str {
        match self.artifact {
            FitArtifact::Binary(_) => "binary",
            FitArtifact::Survival(_) => "survival",
        }
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.curve.grid.clone()
    }

    #[getter]
    fn estimate(&self) -> Vec<f64> {
        self.curve.estimate.clone()
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.curve.lower.clone()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.curve.upper.clone()
    }

    #[getter]
    fn critical_value(&self) -> f64 {
        self.curve.critical_value
    }

    #[getter]
    fn cutoffs(&self) -> Vec<f64> {
        self.regions.cutoffs.clone()
    }

    /// `(kind, lo, hi)` for every region, left to right.
    #[getter]
    fn regions(&self) -> Vec<(String, f64, f64)> {
        self.regions
            .ordered()
            .into_iter()
            .map(|(kind, iv)| (kind.as_str().to_string(), iv.lo, iv.hi))
            .collect()
    }

    /// Index coefficients of a binary fit.
    #[getter]
    fn beta1(&self) -> Option<Vec<f64>> {
        match &self.artifact {
            FitArtifact::Binary(b) => Some(b.fit.beta1.to_vec()),
            FitArtifact::Survival(_) => None,
        }
    }

    #[getter]
    fn selected_lambda(&self) -> Option<f64> {
        match &self.artifact {
            FitArtifact::Binary(b) => Some(b.selected_lambda),
            FitArtifact::Survival(_) => None,
        }
    }

    fn curve_csv(&self) -> String {
        export::curve_csv(&self.curve)
    }

    fn curve_json(&self) -> String {
        export::curve_json(&self.curve, &self.regions)
    }

    fn fit_json(&self) -> PyResult<String> {
        export::to_json(&self.artifact).map_err(to_py)
    }

    #[pyo3(signature = (csv, outcome_harmful=false))]
    fn predict(&self, csv: &str, outcome_harmful: bool) -> PyResult<Vec<Recommendation>> {
        let table = parse_covariates(csv, &self.artifact.score_columns(), self.artifact.id_column())
            .map_err(to_py)?;
        let recs = pipeline::predict(&self.artifact, &self.regions, &table, outcome_harmful)
            .map_err(to_py)?;
        Ok(recs
            .into_iter()
            .map(|r| Recommendation {
                id: r.subject_id,
                score: r.score,
                region: r.region.as_str().to_string(),
                advice: r.advice.as_str().to_string(),
            })
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Fit(kind={}, points={}, cutoffs={:?})",
            self.kind(),
            self.curve.len(),
            self.regions.cutoffs
        )
    }
}

#[pyfunction]
#[pyo3(signature = (dataset, knots=2, lam=None, lambda_grid=None, bandwidth=None, alpha=0.05, n_boot=1000, seed=1, grid_size=100, normalize=false))]
#[allow(clippy::too_many_arguments)]
fn fit_binary(
    py: Python<'_>,
    dataset: &Dataset,
    knots: usize,
    lam: Option<f64>,
    lambda_grid: Option<Vec<f64>>,
    bandwidth: Option<f64>,
    alpha: f64,
    n_boot: usize,
    seed: u64,
    grid_size: usize,
    normalize: bool,
) -> PyResult<Fit> {
    let data::Dataset::Binary(d) = &dataset.inner else {
        return Err(PyValueError::new_err("fit_binary needs a binary dataset"));
    };
    let req = BinaryRequest {
        knots,
        lambda: lam,
        lambda_grid,
        bandwidth,
        alpha,
        n_boot,
        seed,
        grid_size,
        normalize,
        ..Default::default()
    };
    let none: Option<&NormalizationReport> = None;
    let out = py
        .detach(|| pipeline::run_binary(d, none, &req))
        .map_err(to_py)?;
    Ok(Fit {
        artifact: FitArtifact::Binary(Box::new(out.artifact)),
        curve: out.curve,
        regions: out.regions,
    })
}

#[pyfunction]
#[pyo3(signature = (dataset, contrast=None, bandwidth=None, alpha=0.05, n_resample=1000, seed=1, grid_size=50))]
fn fit_survival(
    py: Python<'_>,
    dataset: &Dataset,
    contrast: Option<Vec<f64>>,
    bandwidth: Option<f64>,
    alpha: f64,
    n_resample: usize,
    seed: u64,
    grid_size: usize,
) -> PyResult<Fit> {
    let data::Dataset::Survival(d) = &dataset.inner else {
        return Err(PyValueError::new_err("fit_survival needs a survival dataset"));
    };
    let req = SurvivalRequest {
        contrast,
        bandwidth,
        alpha,
        n_resample,
        seed,
        grid_size,
        ..Default::default()
    };
    let out = py.detach(|| pipeline::run_survival(d, &req)).map_err(to_py)?;
    Ok(Fit {
        artifact: FitArtifact::Survival(Box::new(out.artifact)),
        curve: out.curve,
        regions: out.regions,
    })
}

/// Draw a dataset from a validation design; returns `(csv, truth_json)`.
#[pyfunction]
#[pyo3(signature = (design, n, seed, p=20))]
fn simulate(design: &str, n: usize, seed: u64, p: usize) -> PyResult<(String, String)> {
    match design {
        "binary" => {
            let (d, t) = data::simulate_binary_dgp(n, p, seed).map_err(to_py)?;
            Ok((data::Dataset::Binary(d).to_csv(), export::to_json(&t).map_err(to_py)?))
        }
        "survival" => {
            let (d, t) = data::simulate_survival_dgp(n, seed).map_err(to_py)?;
            Ok((data::Dataset::Survival(d).to_csv(), export::to_json(&t).map_err(to_py)?))
        }
        other => Err(PyValueError::new_err(format!(
            "unknown design {other:?}, expected \"binary\" or \"survival\""
        ))),
    }
}

#[pymodule]
fn cste(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Fit>()?;
    m.add_class::<Recommendation>()?;
    m.add_function(wrap_pyfunction!(fit_binary, m)?)?;
    m.add_function(wrap_pyfunction!(fit_survival, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
