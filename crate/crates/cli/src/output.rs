use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use posdesign::C64;

use crate::CliError;

/// Status recorded for rows whose computation returned an error.
pub const ERROR_STATUS: &str = "error";

/// One row of a sweep CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub sweep_var: f64,
    pub method: String,
    pub worst_peb_m: f64,
    pub los_illum: f64,
    pub solver_status: String,
    pub wall_s: f64,
}

impl SweepRecord {
    pub fn failed(&self) -> bool {
        self.solver_status == ERROR_STATUS || self.solver_status == "max_iterations" || self.solver_status == "numerical_error"
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["sweep_var", "method", "worst_peb_m", "los_illum", "solver_status", "wall_s"];

/// Shortest round-trip decimal; infinities as `inf`/`-inf`, NaN as `nan`.
pub fn format_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:?}")
    }
}

pub fn parse_f64(s: &str) -> Result<f64, CliError> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|e| CliError::Output(format!("bad number {s:?}: {e}"))),
    }
}

pub fn write_sweep<W: Write>(out: W, rows: &[SweepRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in rows {
        w.write_record([
            format_f64(r.sweep_var),
            r.method.clone(),
            format_f64(r.worst_peb_m),
            format_f64(r.los_illum),
            r.solver_status.clone(),
            format_f64(r.wall_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: Read>(input: R) -> Result<Vec<SweepRecord>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != SWEEP_HEADER {
        return Err(CliError::Output(format!("unexpected sweep header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        rows.push(SweepRecord {
            sweep_var: parse_f64(&rec[0])?,
            method: rec[1].to_string(),
            worst_peb_m: parse_f64(&rec[2])?,
            los_illum: parse_f64(&rec[3])?,
            solver_status: rec[4].to_string(),
            wall_s: parse_f64(&rec[5])?,
        });
    }
    Ok(rows)
}

/// Writes a covariance as `N` rows of interleaved real/imaginary parts.
pub fn write_covariance<W: Write>(out: W, x: &DMatrix<C64>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = Vec::with_capacity(2 * x.ncols());
    for j in 0..x.ncols() {
        header.push(format!("c{j}_re"));
        header.push(format!("c{j}_im"));
    }
    w.write_record(&header)?;
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).flat_map(|j| [format!("{:?}", x[(i, j)].re), format!("{:?}", x[(i, j)].im)]).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_covariance<R: Read>(input: R) -> Result<DMatrix<C64>, CliError> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() % 2 != 0 {
            return Err(CliError::Output("covariance rows need interleaved re/im pairs".into()));
        }
        let mut row = Vec::with_capacity(rec.len() / 2);
        for k in 0..rec.len() / 2 {
            row.push(C64::new(parse_f64(&rec[2 * k])?, parse_f64(&rec[2 * k + 1])?));
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Output("covariance must be square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// One sample of an exported beampattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSample {
    pub theta_rad: f64,
    pub method: String,
    pub pattern_db: f64,
}

pub fn write_patterns<W: Write>(out: W, rows: &[PatternSample]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta_rad", "method", "pattern_db"])?;
    for r in rows {
        w.write_record([format_f64(r.theta_rad), r.method.clone(), format_f64(r.pattern_db)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
