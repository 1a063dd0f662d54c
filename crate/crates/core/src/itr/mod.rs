//! Individualized treatment rules from a banded curve: cutoffs, signed
//! regions and per-subject advice.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::binary::BinaryCsteFit;
use crate::curve::CsteCurve;
use crate::data::{CovariateTable, NormalizationReport};
use crate::error::{CsteError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Positive,
    Negative,
    Indeterminate,
    OutOfRange,
}

impl RegionKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionKind::Positive => "positive",
            RegionKind::Negative => "negative",
            RegionKind::Indeterminate => "indeterminate",
            RegionKind::OutOfRange => "out_of_range",
        }
    }
}

impl fmt::Display for RegionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Advice {
    NewTreatment,
    ReferenceTreatment,
    NoSignificantDifference,
    Undetermined,
}

impl Advice {
    pub fn as_str(self) -> &'static str {
        match self {
            Advice::NewTreatment => "new_treatment",
            Advice::ReferenceTreatment => "reference_treatment",
            Advice::NoSignificantDifference => "no_significant_difference",
            Advice::Undetermined => "undetermined",
        }
    }

    /// Advice for a subject in `region`. With a harmful outcome (events are
    /// bad) a negative effect favors the new treatment.
    pub fn for_region(region: RegionKind, outcome_harmful: bool) -> Advice {
        match (region, outcome_harmful) {
            (RegionKind::Negative, true) | (RegionKind::Positive, false) => Advice::NewTreatment,
            (RegionKind::Positive, true) | (RegionKind::Negative, false) => {
                Advice::ReferenceTreatment
            }
            (RegionKind::Indeterminate, _) => Advice::NoSignificantDifference,
            (RegionKind::OutOfRange, _) => Advice::Undetermined,
        }
    }
}

impl fmt::Display for Advice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_closed { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// Abscissae where a band edge crosses zero, increasing.
    pub cutoffs: Vec<f64>,
    /// Where the lower edge is above zero.
    pub positive_regions: Vec<Interval>,
    /// Where the upper edge is below zero.
    pub negative_regions: Vec<Interval>,
    pub indeterminate_regions: Vec<Interval>,
    pub alpha: f64,
    pub grid_min: f64,
    pub grid_max: f64,
}

impl RegionReport {
    /// Region containing `x`, or `OutOfRange` outside the grid span.
    pub fn classify(&self, x: f64) -> RegionKind {
        if !(x >= self.grid_min && x <= self.grid_max) {
            return RegionKind::OutOfRange;
        }
        let lists = [
            (RegionKind::Positive, &self.positive_regions),
            (RegionKind::Negative, &self.negative_regions),
            (RegionKind::Indeterminate, &self.indeterminate_regions),
        ];
        for (kind, list) in lists {
            if list.iter().any(|iv| iv.contains(x)) {
                return kind;
            }
        }
        RegionKind::Indeterminate
    }

    /// All regions in abscissa order, tagged with their kind.
    pub fn ordered(&self) -> Vec<(RegionKind, Interval)> {
        let mut all: Vec<(RegionKind, Interval)> = self
            .positive_regions
            .iter()
            .map(|&iv| (RegionKind::Positive, iv))
            .chain(self.negative_regions.iter().map(|&iv| (RegionKind::Negative, iv)))
            .chain(
                self.indeterminate_regions
                    .iter()
                    .map(|&iv| (RegionKind::Indeterminate, iv)),
            )
            .collect();
        all.sort_by(|a, b| a.1.lo.total_cmp(&b.1.lo).then(b.1.lo_closed.cmp(&a.1.lo_closed)));
        all
    }
}

fn class_at(curve: &CsteCurve, j: usize) -> RegionKind {
    if curve.lower[j] > 0.0 {
        RegionKind::Positive
    } else if curve.upper[j] < 0.0 {
        RegionKind::Negative
    } else {
        RegionKind::Indeterminate
    }
}

/// Zero of the line through (x0, e0) and (x1, e1); `e0` and `e1` bracket zero.
fn crossing(x0: f64, x1: f64, e0: f64, e1: f64) -> f64 {
    if e0 == e1 {
        return x0;
    }
    let t = (e0 / (e0 - e1)).clamp(0.0, 1.0);
    x0 + t * (x1 - x0)
}

/// Cutoffs and signed regions of a banded curve.
///
/// Grid points are classified by the sign of the band; between two grid
/// points of different classes the relevant edge is linearly interpolated to
/// locate the cutoff. Significant regions are open at cutoffs and the
/// indeterminate regions closed, so a subject exactly at a cutoff is never
/// called significant.
pub fn find_regions(curve: &CsteCurve) -> RegionReport {
    let m = curve.len();
    let mut report = RegionReport {
        cutoffs: vec![],
        positive_regions: vec![],
        negative_regions: vec![],
        indeterminate_regions: vec![],
        alpha: curve.alpha,
        grid_min: curve.grid.first().copied().unwrap_or(f64::NAN),
        grid_max: curve.grid.last().copied().unwrap_or(f64::NAN),
    };
    if m == 0 {
        return report;
    }
    // (kind, start, start_is_cutoff)
    let mut pieces: Vec<(RegionKind, f64)> = vec![(class_at(curve, 0), curve.grid[0])];
    for j in 0..m - 1 {
        let (a, b) = (class_at(curve, j), class_at(curve, j + 1));
        if a == b {
            continue;
        }
        let (g0, g1) = (curve.grid[j], curve.grid[j + 1]);
        let lower = || crossing(g0, g1, curve.lower[j], curve.lower[j + 1]);
        let upper = || crossing(g0, g1, curve.upper[j], curve.upper[j + 1]);
        use RegionKind::*;
        match (a, b) {
            (Indeterminate, Positive) | (Positive, Indeterminate) => pieces.push((b, lower())),
            (Indeterminate, Negative) | (Negative, Indeterminate) => pieces.push((b, upper())),
            (Positive, Negative) => {
                pieces.push((Indeterminate, lower()));
                pieces.push((Negative, upper()));
            }
            (Negative, Positive) => {
                pieces.push((Indeterminate, upper()));
                pieces.push((Positive, lower()));
            }
            _ => unreachable!("grid classes are never out of range"),
        }
    }
    for k in 0..pieces.len() {
        let (kind, lo) = pieces[k];
        let hi = pieces.get(k + 1).map_or(report.grid_max, |p| p.1);
        if k > 0 {
            report.cutoffs.push(lo);
        }
        let significant = kind != RegionKind::Indeterminate;
        let iv = Interval {
            lo,
            hi,
            lo_closed: k == 0 || !significant,
            hi_closed: k + 1 == pieces.len() || !significant,
        };
        match kind {
            RegionKind::Positive => report.positive_regions.push(iv),
            RegionKind::Negative => report.negative_regions.push(iv),
            _ => report.indeterminate_regions.push(iv),
        }
    }
    report.cutoffs.dedup();
    report
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    #[serde(rename = "id")]
    pub subject_id: String,
    pub score: f64,
    pub region: RegionKind,
    pub advice: Advice,
}

/// Index x'beta1 of new subjects, after repeating the training normalization.
///
/// Columns are matched by name, so their order in `table` is irrelevant.
/// `report` overrides the transform stored on the fit.
pub fn predict_scores(
    fit: &BinaryCsteFit,
    table: &CovariateTable,
    report: Option<&NormalizationReport>,
) -> Result<Vec<(String, f64)>> {
    let idx: Vec<usize> = fit
        .column_names
        .iter()
        .map(|c| {
            table.column_names.iter().position(|t| t == c).ok_or_else(|| {
                CsteError::Schema(format!("new data lack the training covariate \"{c}\""))
            })
        })
        .collect::<Result<_>>()?;
    if table.column_names.len() != fit.column_names.len() {
        return Err(CsteError::Schema(format!(
            "expected covariates {:?}, got {:?}",
            fit.column_names, table.column_names
        )));
    }
    let mut x = table.x.select(ndarray::Axis(1), &idx);
    match (report.or(fit.normalization.as_ref()), fit.normalization.is_some()) {
        (Some(r), true) => {
            if r.columns != fit.column_names {
                return Err(CsteError::Schema(
                    "normalization report does not match the fit's covariates".into(),
                ));
            }
            x = r.apply(&x)?;
        }
        (Some(_), false) => {
            return Err(CsteError::Schema(
                "the fit was trained on unnormalized covariates".into(),
            ))
        }
        (None, _) => {}
    }
    let scores = fit.index1(&x);
    Ok(table.row_ids.iter().cloned().zip(scores).collect())
}

/// Per-subject advice from the region containing each score.
pub fn recommend(
    scores: &[(String, f64)],
    report: &RegionReport,
    outcome_harmful: bool,
) -> Vec<Recommendation> {
    scores
        .iter()
        .map(|(id, s)| {
            let region = report.classify(*s);
            Recommendation {
                subject_id: id.clone(),
                score: *s,
                region,
                advice: Advice::for_region(region, outcome_harmful),
            }
        })
        .collect()
}
