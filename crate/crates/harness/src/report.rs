//! CSV and JSON artifacts of a sweep.
//!
//! Floats are written in exponent form with 17 significant digits, which
//! round-trips every `f64`. Fields that do not apply to a row are empty.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::aggregate::AggregateRow;
use crate::config::{Algorithm, SweepConfig};
use crate::error::{HarnessError, Result};
use crate::sweep::{DatasetInfo, SweepOutput, SweepRecord};

pub const RECORD_HEADER: [&str; 17] = [
    "algorithm", "n", "t0", "T", "lambda", "eps1", "eps2", "delta", "c", "rep", "seed", "rmse_pre",
    "rmse_post", "bounded", "theory_bound", "eps0", "delta_reg",
];

pub const AGGREGATE_HEADER: [&str; 18] = [
    "algorithm", "n", "t0", "T", "lambda", "eps1", "eps2", "delta", "c", "theory_bound", "eps0",
    "delta_reg", "mean_rmse_pre", "min_rmse_post", "max_rmse_post", "mean_rmse_post",
    "ci_half_width", "reps",
];

pub const RECORDS_FILE: &str = "records.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> HarnessError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io("<csv>", io),
        other => HarnessError::Config(format!("csv: {other:?}")),
    }
}

pub fn write_records<W: Write>(out: W, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.algorithm.name().to_string(),
            r.n.to_string(),
            r.t0.to_string(),
            r.periods.to_string(),
            fmt_f64(r.lambda),
            fmt_opt(r.eps1),
            fmt_opt(r.eps2),
            fmt_opt(r.delta),
            fmt_opt(r.c),
            r.rep.to_string(),
            r.seed.to_string(),
            fmt_f64(r.rmse_pre),
            fmt_f64(r.rmse_post),
            r.bounded.to_string(),
            fmt_opt(r.theory_bound),
            fmt_opt(r.eps0),
            fmt_opt(r.delta_reg),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))
}

pub fn write_aggregates<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AGGREGATE_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.algorithm.name().to_string(),
            r.n.to_string(),
            r.t0.to_string(),
            r.periods.to_string(),
            fmt_f64(r.lambda),
            fmt_opt(r.eps1),
            fmt_opt(r.eps2),
            fmt_opt(r.delta),
            fmt_opt(r.c),
            fmt_opt(r.theory_bound),
            fmt_opt(r.eps0),
            fmt_opt(r.delta_reg),
            fmt_f64(r.mean_rmse_pre),
            fmt_f64(r.min_rmse_post),
            fmt_f64(r.max_rmse_post),
            fmt_f64(r.mean_rmse_post),
            fmt_f64(r.ci_half_width),
            r.reps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io("<csv>", e))
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, col: usize) -> Result<T> {
    let raw = row.get(col).unwrap_or_default();
    raw.parse().map_err(|_| {
        HarnessError::Config(format!("column {}: cannot parse {raw:?}", AGGREGATE_HEADER[col]))
    })
}

fn parse_opt(row: &csv::StringRecord, col: usize) -> Result<Option<f64>> {
    match row.get(col) {
        Some("") | None => Ok(None),
        Some(_) => parse_field(row, col).map(Some),
    }
}

/// Reads an aggregate CSV, rejecting any header other than the one written
/// by [`write_aggregates`].
pub fn read_aggregates<R: Read>(input: R) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    for (k, want) in AGGREGATE_HEADER.iter().enumerate() {
        match header.get(k) {
            Some(got) if got == *want => {}
            got => {
                return Err(HarnessError::Config(format!(
                    "aggregate column {k}: expected {want:?}, found {got:?}"
                )))
            }
        }
    }
    if header.len() != AGGREGATE_HEADER.len() {
        return Err(HarnessError::Config(format!(
            "aggregate header has {} columns, expected {}",
            header.len(),
            AGGREGATE_HEADER.len()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let name = rec.get(0).unwrap_or_default();
        let algorithm = Algorithm::parse(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown algorithm {name:?}")))?;
        rows.push(AggregateRow {
            algorithm,
            n: parse_field(&rec, 1)?,
            t0: parse_field(&rec, 2)?,
            periods: parse_field(&rec, 3)?,
            lambda: parse_field(&rec, 4)?,
            eps1: parse_opt(&rec, 5)?,
            eps2: parse_opt(&rec, 6)?,
            delta: parse_opt(&rec, 7)?,
            c: parse_opt(&rec, 8)?,
            theory_bound: parse_opt(&rec, 9)?,
            eps0: parse_opt(&rec, 10)?,
            delta_reg: parse_opt(&rec, 11)?,
            mean_rmse_pre: parse_field(&rec, 12)?,
            min_rmse_post: parse_field(&rec, 13)?,
            max_rmse_post: parse_field(&rec, 14)?,
            mean_rmse_post: parse_field(&rec, 15)?,
            ci_half_width: parse_field(&rec, 16)?,
            reps: parse_field(&rec, 17)?,
        });
    }
    Ok(rows)
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a SweepConfig,
    datasets: &'a [DatasetInfo],
    records: usize,
    cells: usize,
}

fn at(path: &Path) -> impl Fn(HarnessError) -> HarnessError + '_ {
    move |e| match e {
        HarnessError::Io { source, .. } => HarnessError::io(path, source),
        other => other,
    }
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| HarnessError::io(path, e))
}

/// Writes records, aggregates and a manifest into `dir`, creating it if
/// needed. Returns the paths written.
pub fn write_outputs(dir: &Path, cfg: &SweepConfig, out: &SweepOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let records = dir.join(RECORDS_FILE);
    let aggregate = dir.join(AGGREGATE_FILE);
    let manifest = dir.join(MANIFEST_FILE);

    write_records(std::io::BufWriter::new(create(&records)?), &out.records).map_err(at(&records))?;
    write_aggregates(std::io::BufWriter::new(create(&aggregate)?), &out.aggregates)
        .map_err(at(&aggregate))?;
    let doc = Manifest {
        config: cfg,
        datasets: &out.datasets,
        records: out.records.len(),
        cells: out.aggregates.len(),
    };
    let text = serde_json::to_string_pretty(&doc).map_err(|e| HarnessError::Config(e.to_string()))?;
    fs::write(&manifest, text + "\n").map_err(|e| HarnessError::io(&manifest, e))?;
    Ok(vec![records, aggregate, manifest])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(5000.0), "5.0000000000000000e3");
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }
}
