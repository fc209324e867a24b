//! Long-form CSV ingestion and tidy CSV writers.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use tvmfm::{FactorPath, LoadingPath, MatrixSeries, SwitchDiagnostics};

use crate::error::{CliError, CliResult};

#[derive(Deserialize)]
struct Entry {
    t: usize,
    i: usize,
    j: usize,
    value: f64,
}

/// Parse a `t,i,j,value` table. Every `(t, i, j)` in the implied
/// `T x p x q` grid must appear exactly once.
pub fn read_series<R: Read>(reader: R) -> CliResult<MatrixSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if headers != ["t", "i", "j", "value"] {
        return Err(CliError::input(format!("expected header t,i,j,value, got {}", headers.join(","))));
    }
    let mut entries = Vec::new();
    for (line, rec) in rdr.deserialize::<Entry>().enumerate() {
        let e = rec?;
        if e.t == 0 || e.i == 0 || e.j == 0 {
            return Err(CliError::input(format!("record {}: indices are 1-based", line + 1)));
        }
        if !e.value.is_finite() {
            return Err(CliError::input(format!("record {}: non-finite value at (t={}, i={}, j={})", line + 1, e.t, e.i, e.j)));
        }
        entries.push(e);
    }
    let len = entries.iter().map(|e| e.t).max().ok_or_else(|| CliError::input("no data rows"))?;
    let p = entries.iter().map(|e| e.i).max().unwrap_or(0);
    let q = entries.iter().map(|e| e.j).max().unwrap_or(0);
    let mut mats = vec![DMatrix::from_element(p, q, f64::NAN); len];
    let mut seen = vec![false; len * p * q];
    for e in &entries {
        let slot = ((e.t - 1) * p + e.i - 1) * q + e.j - 1;
        if std::mem::replace(&mut seen[slot], true) {
            return Err(CliError::input(format!("duplicate entry (t={}, i={}, j={})", e.t, e.i, e.j)));
        }
        mats[e.t - 1][(e.i - 1, e.j - 1)] = e.value;
    }
    if let Some(slot) = seen.iter().position(|s| !s) {
        let (t, rest) = (slot / (p * q), slot % (p * q));
        return Err(CliError::input(format!("missing entry (t={}, i={}, j={})", t + 1, rest / q + 1, rest % q + 1)));
    }
    Ok(MatrixSeries::new(mats)?)
}

pub fn read_series_file(path: &Path) -> CliResult<MatrixSeries> {
    let file = File::open(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    read_series(file)
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    let file = File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(BufWriter::new(file))
}

/// Write a series in the long form accepted by [`read_series`]. Values use
/// the shortest representation that parses back to the same `f64`.
pub fn write_series<W: Write>(mut out: W, series: &MatrixSeries) -> CliResult<()> {
    writeln!(out, "t,i,j,value")?;
    for (t, m) in series.data().iter().enumerate() {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                writeln!(out, "{},{},{},{}", t + 1, i + 1, j + 1, m[(i, j)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn write_series_file(path: &Path, series: &MatrixSeries) -> CliResult<()> {
    write_series(create(path)?, series)
}

/// `t,i,factor,value` for a sequence of `n x d` matrices.
pub fn write_loadings(path: &Path, mats: &[DMatrix<f64>]) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "t,i,factor,value")?;
    for (t, m) in mats.iter().enumerate() {
        for i in 0..m.nrows() {
            for f in 0..m.ncols() {
                writeln!(out, "{},{},{},{}", t + 1, i + 1, f + 1, m[(i, f)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,index,value` with the `top` largest eigenvalues at each time.
pub fn write_eigvals(path: &Path, path_est: &LoadingPath, top: usize) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "t,index,value")?;
    let spectra = if path_est.spectrum.is_empty() { &path_est.eigvals } else { &path_est.spectrum };
    for (t, s) in spectra.iter().enumerate() {
        for (j, v) in s.iter().take(top).enumerate() {
            writeln!(out, "{},{},{}", t + 1, j + 1, v)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `t,pair,statistic,threshold,q95`; the statistic is blank where it is undefined.
pub fn write_switch_stats(path: &Path, diag: &SwitchDiagnostics) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "t,pair,statistic,threshold,q95")?;
    for (k, row) in diag.stats.iter().enumerate() {
        for (t, v) in row.iter().enumerate() {
            let stat = v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{}", t + 1, k + 1, stat, diag.thresholds[k], diag.upper_q95[k])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// `pair,a,b`: detected regions `(a, b]`.
pub fn write_regions(path: &Path, diag: &SwitchDiagnostics) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "pair,a,b")?;
    for r in &diag.regions {
        writeln!(out, "{},{},{}", r.kappa, r.a, r.b)?;
    }
    out.flush()?;
    Ok(())
}

/// `t,kf,rf,value`.
pub fn write_factors(path: &Path, factors: &FactorPath) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "t,kf,rf,value")?;
    for (t, m) in factors.mats.iter().enumerate() {
        for a in 0..m.nrows() {
            for b in 0..m.ncols() {
                writeln!(out, "{},{},{},{}", t + 1, a + 1, b + 1, m[(a, b)])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Header plus rows, written as-is.
pub fn write_table(path: &Path, header: &str, rows: &[String]) -> CliResult<()> {
    let mut out = create(path)?;
    writeln!(out, "{header}")?;
    for r in rows {
        writeln!(out, "{r}")?;
    }
    out.flush()?;
    Ok(())
}
