use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::encode::encode_treatment;
use super::{BinaryDataset, CovariateTable, Dataset, SurvivalDataset};
use crate::error::{CsteError, Result};

/// Role assignment of CSV columns. Supplied by the caller, never inferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Schema {
    Binary {
        outcome: String,
        treatment: String,
        covariates: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
    },
    Survival {
        time: String,
        status: String,
        biomarker: String,
        /// Single categorical treatment column.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        treatment: Option<String>,
        /// Reference level of `treatment`; defaults to the highest level.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<String>,
        /// Pre-coded dummy columns.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        treatments: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<String>,
    },
}

impl Schema {
    /// Schema that re-reads the output of [`Dataset::to_csv`].
    pub fn of(dataset: &Dataset) -> Schema {
        match dataset {
            Dataset::Binary(d) => Schema::Binary {
                outcome: d.outcome_name.clone(),
                treatment: d.treatment_name.clone(),
                covariates: d.column_names.clone(),
                id: d.id_name.clone(),
            },
            Dataset::Survival(d) => Schema::Survival {
                time: d.time_name.clone(),
                status: d.status_name.clone(),
                biomarker: d.biomarker_name.clone(),
                treatment: None,
                reference: None,
                treatments: Some(d.treatment_labels.clone()),
                id: d.id_name.clone(),
            },
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(text: &str) -> Result<Table> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CsteError::Input(format!("cannot read header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut seen = HashMap::new();
        for (i, h) in header.iter().enumerate() {
            if seen.insert(h.as_str(), i).is_some() {
                return Err(CsteError::Schema(format!("duplicate column \"{h}\"")));
            }
        }
        let mut rows = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CsteError::Input(format!("row {}: {e}", r + 1)))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsteError::Schema(format!("unknown column \"{name}\"")))
    }

    fn cell(&self, row: usize, col: usize) -> Result<&str> {
        let v = self.rows[row][col].as_str();
        if v.is_empty() || v.eq_ignore_ascii_case("na") {
            return Err(CsteError::Cell {
                row: row + 1,
                column: self.header[col].clone(),
                message: "missing value".into(),
            });
        }
        Ok(v)
    }

    fn real(&self, row: usize, col: usize) -> Result<f64> {
        let s = self.cell(row, col)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(CsteError::Cell {
                row: row + 1,
                column: self.header[col].clone(),
                message: format!("expected a finite number, got {s:?}"),
            }),
        }
    }

    fn binary(&self, row: usize, col: usize) -> Result<u8> {
        let s = self.cell(row, col)?;
        match s.parse::<f64>() {
            Ok(v) if v == 0.0 => Ok(0),
            Ok(v) if v == 1.0 => Ok(1),
            _ => Err(CsteError::Cell {
                row: row + 1,
                column: self.header[col].clone(),
                message: format!("expected 0 or 1, got {s:?}"),
            }),
        }
    }

    fn ids(&self, id: Option<&String>) -> Result<Vec<String>> {
        match id {
            Some(name) => {
                let c = self.column(name)?;
                (0..self.rows.len())
                    .map(|r| self.cell(r, c).map(str::to_string))
                    .collect()
            }
            None => Ok((1..=self.rows.len()).map(|i| i.to_string()).collect()),
        }
    }

    fn matrix(&self, cols: &[usize]) -> Result<Array2<f64>> {
        let mut x = Array2::zeros((self.rows.len(), cols.len()));
        for r in 0..self.rows.len() {
            for (j, &c) in cols.iter().enumerate() {
                x[[r, j]] = self.real(r, c)?;
            }
        }
        Ok(x)
    }
}

/// Parse a header-first, comma-delimited file into a typed dataset.
pub fn parse_csv(text: &str, schema: &Schema) -> Result<Dataset> {
    let t = Table::read(text)?;
    match schema {
        Schema::Binary {
            outcome,
            treatment,
            covariates,
            id,
        } => {
            if covariates.is_empty() {
                return Err(CsteError::Schema("at least one covariate is required".into()));
            }
            let yc = t.column(outcome)?;
            let zc = t.column(treatment)?;
            let xc: Vec<usize> = covariates
                .iter()
                .map(|c| t.column(c))
                .collect::<Result<_>>()?;
            let row_ids = t.ids(id.as_ref())?;
            let mut y = Vec::with_capacity(t.rows.len());
            let mut z = Vec::with_capacity(t.rows.len());
            for r in 0..t.rows.len() {
                y.push(t.binary(r, yc)?);
                z.push(t.binary(r, zc)?);
            }
            let x = t.matrix(&xc)?;
            Ok(Dataset::Binary(BinaryDataset {
                y,
                z,
                x,
                column_names: covariates.clone(),
                row_ids,
                outcome_name: outcome.clone(),
                treatment_name: treatment.clone(),
                id_name: id.clone(),
            }))
        }
        Schema::Survival {
            time,
            status,
            biomarker,
            treatment,
            reference,
            treatments,
            id,
        } => {
            let tc = t.column(time)?;
            let sc = t.column(status)?;
            let bc = t.column(biomarker)?;
            let row_ids = t.ids(id.as_ref())?;
            let n = t.rows.len();
            let mut times = Vec::with_capacity(n);
            let mut st = Vec::with_capacity(n);
            let mut xs = Vec::with_capacity(n);
            for r in 0..n {
                let v = t.real(r, tc)?;
                if v <= 0.0 {
                    return Err(CsteError::Cell {
                        row: r + 1,
                        column: time.clone(),
                        message: "time must be strictly positive".into(),
                    });
                }
                times.push(v);
                st.push(t.binary(r, sc)?);
                xs.push(t.real(r, bc)?);
            }
            let (z, labels) = match (treatment, treatments) {
                (Some(col), None) => {
                    let c = t.column(col)?;
                    let raw: Vec<String> = (0..n)
                        .map(|r| t.cell(r, c).map(str::to_string))
                        .collect::<Result<_>>()?;
                    let coding = encode_treatment(&raw, reference.as_deref())?;
                    let labels = coding
                        .labels
                        .iter()
                        .map(|l| format!("{col}={l}"))
                        .collect();
                    (coding.dummies, labels)
                }
                (None, Some(cols)) if !cols.is_empty() => {
                    if reference.is_some() {
                        return Err(CsteError::Schema(
                            "reference applies only to a categorical treatment column".into(),
                        ));
                    }
                    let idx: Vec<usize> =
                        cols.iter().map(|c| t.column(c)).collect::<Result<_>>()?;
                    let mut z = Array2::zeros((n, idx.len()));
                    for r in 0..n {
                        for (k, &c) in idx.iter().enumerate() {
                            z[[r, k]] = t.binary(r, c)? as f64;
                        }
                    }
                    (z, cols.clone())
                }
                _ => {
                    return Err(CsteError::Schema(
                        "survival schema needs exactly one of `treatment` or `treatments`".into(),
                    ))
                }
            };
            let d = SurvivalDataset {
                time: times,
                status: st,
                x: xs,
                z,
                treatment_labels: labels,
                row_ids,
                time_name: time.clone(),
                status_name: status.clone(),
                biomarker_name: biomarker.clone(),
                id_name: id.clone(),
            };
            d.validate()?;
            Ok(Dataset::Survival(d))
        }
    }
}

/// Read covariates of new subjects by column name. Extra columns are ignored,
/// an empty input yields an empty table.
pub fn parse_covariates(
    text: &str,
    covariates: &[String],
    id: Option<&String>,
) -> Result<CovariateTable> {
    if text.trim().is_empty() {
        return Ok(CovariateTable {
            x: Array2::zeros((0, covariates.len())),
            column_names: covariates.to_vec(),
            row_ids: vec![],
        });
    }
    let t = Table::read(text)?;
    let cols: Vec<usize> = covariates
        .iter()
        .map(|c| t.column(c))
        .collect::<Result<_>>()?;
    // fall back to positional ids when the training id column is absent here
    let id = id.filter(|name| t.header.iter().any(|h| h == *name));
    Ok(CovariateTable {
        x: t.matrix(&cols)?,
        column_names: covariates.to_vec(),
        row_ids: t.ids(id)?,
    })
}

fn push_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        out.push_str(&c);
        first = false;
    }
    out.push('\n');
}

pub(super) fn binary_to_csv(d: &BinaryDataset) -> String {
    let mut out = String::new();
    let mut header = vec![];
    if let Some(id) = &d.id_name {
        header.push(id.clone());
    }
    header.push(d.outcome_name.clone());
    header.push(d.treatment_name.clone());
    header.extend(d.column_names.iter().cloned());
    push_row(&mut out, header);
    for i in 0..d.n() {
        let mut row = vec![];
        if d.id_name.is_some() {
            row.push(d.row_ids[i].clone());
        }
        row.push(d.y[i].to_string());
        row.push(d.z[i].to_string());
        row.extend(d.x.row(i).iter().map(|v| v.to_string()));
        push_row(&mut out, row);
    }
    out
}

pub(super) fn survival_to_csv(d: &SurvivalDataset) -> String {
    let mut out = String::new();
    let mut header = vec![];
    if let Some(id) = &d.id_name {
        header.push(id.clone());
    }
    header.push(d.time_name.clone());
    header.push(d.status_name.clone());
    header.push(d.biomarker_name.clone());
    header.extend(d.treatment_labels.iter().cloned());
    push_row(&mut out, header);
    for i in 0..d.n() {
        let mut row = vec![];
        if d.id_name.is_some() {
            row.push(d.row_ids[i].clone());
        }
        row.push(d.time[i].to_string());
        row.push(d.status[i].to_string());
        row.push(d.x[i].to_string());
        row.extend(d.z.row(i).iter().map(|v| (*v as u8).to_string()));
        push_row(&mut out, row);
    }
    out
}
