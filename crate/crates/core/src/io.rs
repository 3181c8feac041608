//! CSV and JSON forms of panels and targets.
//!
//! CSV: header `donor_id,t1,...,tT`, one donor per row, optional final row
//! with id `target`. JSON: `{n, T, t0, values, truth?, target?, generator?}`
//! with donor-major nested arrays; floats round-trip bit-exactly.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::datagen::{LatentModelSpec, LinearDataset};
use crate::error::{DpscError, Result};
use crate::model::{DonorPanel, PanelTruth, TargetSeries, TargetTruth};

pub const TARGET_ROW_ID: &str = "target";

fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix_from_rows(rows: &[Vec<f64>], n: usize, periods: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != periods) {
        return Err(DpscError::Parse(format!(
            "{what} must be {n} rows of {periods} values"
        )));
    }
    Ok(DMatrix::from_fn(n, periods, |i, t| rows[i][t]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixTruthDoc {
    pub signal: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorTruthDoc {
    pub signal: Vec<f64>,
    pub noise: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDoc {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<VectorTruthDoc>,
}

/// Generator parameters recorded alongside generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub model: LatentModelSpec,
    pub seed: u64,
    pub thetas: Vec<f64>,
    pub theta0: f64,
}

/// JSON document for a panel, optionally with its target and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDocument {
    pub n: usize,
    #[serde(rename = "T")]
    pub periods: usize,
    pub t0: usize,
    pub values: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<MatrixTruthDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

impl DatasetDocument {
    pub fn new(panel: &DonorPanel, target: Option<&TargetSeries>) -> Self {
        Self {
            n: panel.n(),
            periods: panel.periods(),
            t0: panel.t0(),
            values: rows_of(panel.values()),
            truth: panel.truth().map(|t| MatrixTruthDoc {
                signal: rows_of(&t.signal),
                noise: rows_of(&t.noise),
            }),
            target: target.map(|y| TargetDoc {
                values: y.values().iter().copied().collect(),
                truth: y.truth().map(|t| VectorTruthDoc {
                    signal: t.signal.iter().copied().collect(),
                    noise: t.noise.iter().copied().collect(),
                }),
            }),
            generator: None,
        }
    }

    pub fn from_linear(data: &LinearDataset, model: LatentModelSpec, seed: u64) -> Self {
        let mut doc = Self::new(&data.panel, Some(&data.target));
        doc.generator = Some(GeneratorInfo {
            model,
            seed,
            thetas: data.thetas.iter().copied().collect(),
            theta0: data.theta0,
        });
        doc
    }

    pub fn panel(&self) -> Result<DonorPanel> {
        let values = matrix_from_rows(&self.values, self.n, self.periods, "values")?;
        let truth = match &self.truth {
            Some(t) => Some(PanelTruth {
                signal: matrix_from_rows(&t.signal, self.n, self.periods, "truth.signal")?,
                noise: matrix_from_rows(&t.noise, self.n, self.periods, "truth.noise")?,
            }),
            None => None,
        };
        DonorPanel::with_truth(values, self.t0, truth)
    }

    pub fn target_series(&self) -> Result<Option<TargetSeries>> {
        let Some(doc) = &self.target else {
            return Ok(None);
        };
        let truth = doc.truth.as_ref().map(|t| TargetTruth {
            signal: DVector::from_vec(t.signal.clone()),
            noise: DVector::from_vec(t.noise.clone()),
        });
        TargetSeries::with_truth(DVector::from_vec(doc.values.clone()), self.t0, truth).map(Some)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn write_row<W: Write>(out: &mut W, id: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    write!(out, "{id}")?;
    for v in values {
        write!(out, ",{v}")?;
    }
    writeln!(out)?;
    Ok(())
}

/// Writes the panel (and optionally the target as a final row) as CSV.
pub fn write_panel_csv<W: Write>(
    out: &mut W,
    panel: &DonorPanel,
    target: Option<&TargetSeries>,
) -> Result<()> {
    write!(out, "donor_id")?;
    for t in 1..=panel.periods() {
        write!(out, ",t{t}")?;
    }
    writeln!(out)?;
    for (i, row) in panel.values().row_iter().enumerate() {
        write_row(out, &(i + 1).to_string(), row.iter().copied())?;
    }
    if let Some(y) = target {
        write_row(out, TARGET_ROW_ID, y.values().iter().copied())?;
    }
    Ok(())
}

/// Reads a panel CSV. The split index is not part of the CSV form.
pub fn read_panel_csv<R: BufRead>(input: R, t0: usize) -> Result<(DonorPanel, Option<TargetSeries>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| DpscError::Parse("empty CSV".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"donor_id") {
        return Err(DpscError::Parse("header must start with donor_id".into()));
    }
    for (k, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("t{k}") {
            return Err(DpscError::Parse(format!("unexpected column {c:?} at position {k}")));
        }
    }
    let periods = cols.len() - 1;
    let mut rows = Vec::new();
    let mut target = None;
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.trim().split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| DpscError::Parse(format!("line {}: {f:?}: {e}", lineno + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != periods {
            return Err(DpscError::Parse(format!(
                "line {}: expected {periods} values, got {}",
                lineno + 2,
                values.len()
            )));
        }
        if id == TARGET_ROW_ID {
            target = Some(values);
        } else {
            rows.push(values);
        }
    }
    let n = rows.len();
    let panel = DonorPanel::new(matrix_from_rows(&rows, n, periods, "donor rows")?, t0)?;
    let target = target
        .map(|v| TargetSeries::new(DVector::from_vec(v), t0))
        .transpose()?;
    Ok((panel, target))
}
