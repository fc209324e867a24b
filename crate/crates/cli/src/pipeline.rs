//! Estimation pipeline shared by `estimate` and `diagnose`.

use nalgebra::DMatrix;
use tvmfm::estimation::{estimate_side, GramSeries};
use tvmfm::experiment::EstimationSettings;
use tvmfm::smoothing::{detect_switches_with, repair_and_smooth_with, DetectOptions, RepairOptions};
use tvmfm::{apply_global_rotation, estimate_factors, estimate_rank, Error, FactorPath, LoadingPath, LoadingSide, MatrixSeries, SwitchDiagnostics};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    /// Fixed ranks; estimated by the eigenvalue ratio when `None`.
    pub k: Option<usize>,
    pub r: Option<usize>,
    /// Trailing moving-average window applied before estimation.
    pub average: Option<usize>,
    pub settings: EstimationSettings,
    pub detect: DetectOptions,
    /// Run switch detection and repair.
    pub smooth: bool,
    /// 1-based inclusive varimax window; the whole sample when `None`.
    pub varimax_window: Option<(usize, usize)>,
    /// Skip the global rotation.
    pub no_rotation: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            k: None,
            r: None,
            average: None,
            settings: EstimationSettings::default(),
            detect: DetectOptions::default(),
            smooth: true,
            varimax_window: None,
            no_rotation: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SideResult {
    pub raw: LoadingPath,
    pub diagnostics: SwitchDiagnostics,
    /// Repaired and rotated path.
    pub fitted: LoadingPath,
}

#[derive(Debug, Clone)]
pub struct EstimateOutput {
    pub k: usize,
    pub r: usize,
    pub rows: SideResult,
    pub cols: SideResult,
    pub factors: FactorPath,
    pub warnings: Vec<String>,
}

fn estimate_one(
    series: &MatrixSeries,
    opts: &EstimateOptions,
    side: LoadingSide,
    fixed: Option<usize>,
    warnings: &mut Vec<String>,
) -> CliResult<(usize, SideResult)> {
    let n = side.dim(series);
    let grams = GramSeries::new(series, side);
    let spec = opts.settings.spec(series, side)?;
    let d = match fixed {
        Some(d) if d == 0 || d > n => {
            return Err(CliError::input(format!("rank {d} outside [1, {n}] for side {}", side.suffix())));
        }
        Some(d) => d,
        None => {
            let probe = estimate_side(&grams, &spec, 1)?;
            estimate_rank(&probe.spectrum, opts.settings.kmax.resolve(n))?
        }
    };
    let raw = estimate_side(&grams, &spec, d)?;

    let mut diagnostics = SwitchDiagnostics::empty(series.len());
    let mut fitted = raw.clone();
    if opts.smooth && d >= 2 {
        let onesided = opts.settings.onesided_spec(series, side)?;
        match detect_switches_with(series, &onesided, side, d, &opts.detect) {
            Ok(diag) => diagnostics = diag,
            Err(e) => warnings.push(format!("side {}: switch detection skipped: {e}", side.suffix())),
        }
        match repair_and_smooth_with(&raw, &diagnostics.regions, &RepairOptions::default()) {
            Ok(path) => fitted = path,
            Err(e @ Error::Unrepairable(_)) => {
                warnings.push(format!("side {}: {e}; exporting the unrepaired path", side.suffix()));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !opts.no_rotation && d >= 2 {
        let window = opts.varimax_window.unwrap_or((1, series.len()));
        let (rotated, res) = apply_global_rotation(&fitted, window.0..=window.1)?;
        if !res.converged {
            warnings.push(format!("side {}: varimax did not converge", side.suffix()));
        }
        fitted = rotated;
    }
    Ok((d, SideResult { raw, diagnostics, fitted }))
}

/// Preprocess, estimate ranks and loadings, detect and repair switches,
/// rotate, and compute factors from the final loadings.
pub fn run_estimate(series: &MatrixSeries, opts: &EstimateOptions) -> CliResult<EstimateOutput> {
    let averaged;
    let series = match opts.average {
        Some(s) if s > 1 => {
            averaged = series.rolling_mean(s)?;
            &averaged
        }
        Some(0) => return Err(CliError::input("averaging window must be positive")),
        _ => series,
    };
    let mut warnings = Vec::new();
    let (k, rows) = estimate_one(series, opts, LoadingSide::Row, opts.k, &mut warnings)?;
    let (r, cols) = estimate_one(series, opts, LoadingSide::Column, opts.r, &mut warnings)?;
    let factors = estimate_factors(series, &rows.fitted, &cols.fitted)?;
    Ok(EstimateOutput { k, r, rows, cols, factors, warnings })
}

/// Scale each column to unit absolute sum. Zero columns are left unchanged.
pub fn normalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let total: f64 = col.iter().map(|v| v.abs()).sum();
        if total > 0.0 {
            col /= total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_columns_have_unit_abs_sum() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, -2.0, -3.0, 0.5, 4.0, 0.0]);
        let n = normalize_columns(&m);
        for c in n.column_iter() {
            assert!((c.iter().map(|v| v.abs()).sum::<f64>() - 1.0).abs() < 1e-15);
        }
        assert_eq!(normalize_columns(&DMatrix::zeros(2, 1)), DMatrix::zeros(2, 1));
    }
}
