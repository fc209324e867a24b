//! Local PCA estimation of time-varying row and column loadings.
//!
//! At each time point the kernel-weighted scatter matrices
//!
//! ```text
//! M_R(t) = 1/(pqT) sum_s K(t, s) Y_s Y_s^T      (p x p)
//! M_C(t) = 1/(pqT) sum_s K(t, s) Y_s^T Y_s      (q x q)
//! ```
//!
//! are eigendecomposed; the loadings are `sqrt(p)` (resp. `sqrt(q)`) times
//! the leading eigenvectors. Factors and signal follow by projection.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{boundary_weight, onesided_weight, onesided_window, KernelSide, KernelSpec, KernelWeights};
use crate::linalg::{add_scaled, asymmetry, canonical_signs, sym_eigen_desc, symmetrize};

/// Eigenvalues in `[-EIG_CLAMP, 0)` are numerical noise of a PSD matrix.
const EIG_CLAMP: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;

/// An observed matrix-valued time series `Y_1, ..., Y_T`, each `p x q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSeries {
    data: Vec<DMatrix<f64>>,
    p: usize,
    q: usize,
}

impl MatrixSeries {
    pub fn new(data: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = data.first().ok_or_else(|| Error::invalid("series must contain at least one matrix"))?;
        let (p, q) = first.shape();
        if p == 0 || q == 0 {
            return Err(Error::invalid("matrices must be non-empty"));
        }
        for (i, m) in data.iter().enumerate() {
            if m.shape() != (p, q) {
                return Err(Error::shape(format!("{p}x{q}"), format!("{}x{} at t = {}", m.nrows(), m.ncols(), i + 1)));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("non-finite entry at t = {}", i + 1)));
            }
        }
        Ok(Self { data, p, q })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn data(&self) -> &[DMatrix<f64>] {
        &self.data
    }

    /// Observation at 1-based time `t`.
    pub fn at(&self, t: usize) -> Result<&DMatrix<f64>> {
        if t == 0 || t > self.len() {
            return Err(Error::TimeOutOfRange { t, len: self.len() });
        }
        Ok(&self.data[t - 1])
    }

    pub fn into_inner(self) -> Vec<DMatrix<f64>> {
        self.data
    }

    /// Trailing moving average over `window` observations. The first
    /// `window - 1` points average over the history available so far.
    pub fn rolling_mean(&self, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("rolling window must be at least 1"));
        }
        let mut out = Vec::with_capacity(self.len());
        let mut acc = DMatrix::zeros(self.p, self.q);
        for t in 0..self.len() {
            acc += &self.data[t];
            if t >= window {
                acc -= &self.data[t - window];
            }
            let n = (t + 1).min(window) as f64;
            out.push(&acc / n);
        }
        Self::new(out)
    }
}

/// Which loading a scatter matrix or path refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LoadingSide {
    /// `p x k` row loadings, from `Y Y^T`.
    Row,
    /// `q x r` column loadings, from `Y^T Y`.
    Column,
}

impl LoadingSide {
    pub fn dim(self, series: &MatrixSeries) -> usize {
        match self {
            LoadingSide::Row => series.p(),
            LoadingSide::Column => series.q(),
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            LoadingSide::Row => "R",
            LoadingSide::Column => "C",
        }
    }
}

/// Time-indexed loading matrices together with their eigenvalues.
///
/// Raw paths from [`estimate_loadings`] have columns scaled so that
/// `A_t^T A_t = n I`. `spectrum` holds the full eigenvalue vector of the
/// scatter matrix when it is known, and is empty otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadingPath {
    pub side: LoadingSide,
    pub mats: Vec<DMatrix<f64>>,
    pub eigvals: Vec<Vec<f64>>,
    pub spectrum: Vec<Vec<f64>>,
    pub smoothed: bool,
}

impl LoadingPath {
    /// Wrap known loading matrices (e.g. simulation truth) without eigenvalues.
    pub fn from_mats(side: LoadingSide, mats: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = mats.first().ok_or_else(|| Error::invalid("empty loading path"))?;
        let shape = first.shape();
        if let Some(bad) = mats.iter().find(|m| m.shape() != shape) {
            return Err(Error::shape(format!("{}x{}", shape.0, shape.1), format!("{}x{}", bad.nrows(), bad.ncols())));
        }
        Ok(Self {
            side,
            mats,
            eigvals: Vec::new(),
            spectrum: Vec::new(),
            smoothed: false,
        })
    }

    pub fn len(&self) -> usize {
        self.mats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mats.is_empty()
    }

    /// Cross-sectional dimension `n` (rows of each loading matrix).
    pub fn n(&self) -> usize {
        self.mats.first().map_or(0, |m| m.nrows())
    }

    /// Number of loading columns `d`.
    pub fn d(&self) -> usize {
        self.mats.first().map_or(0, |m| m.ncols())
    }
}

/// Estimated factor matrices `F_t`, each `k x r`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPath {
    pub mats: Vec<DMatrix<f64>>,
}

/// Result of a single local PCA.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPca {
    /// `n x d`, columns are `sqrt(n)` times unit eigenvectors.
    pub loading: DMatrix<f64>,
    /// Leading `d` eigenvalues, descending.
    pub eigvals: Vec<f64>,
    /// All `n` eigenvalues, descending.
    pub spectrum: Vec<f64>,
}

/// Per-time Gram matrices `Y_s Y_s^T` or `Y_s^T Y_s`, computed once and reused
/// by every scatter matrix of the same side.
#[derive(Debug, Clone)]
pub struct GramSeries {
    side: LoadingSide,
    grams: Vec<DMatrix<f64>>,
    norm: f64,
}

impl GramSeries {
    pub fn new(series: &MatrixSeries, side: LoadingSide) -> Self {
        let grams = series
            .data()
            .par_iter()
            .map(|y| {
                let mut g = match side {
                    LoadingSide::Row => y * y.transpose(),
                    LoadingSide::Column => y.transpose() * y,
                };
                symmetrize(&mut g);
                g
            })
            .collect();
        let norm = 1.0 / (series.p() * series.q() * series.len()) as f64;
        Self { side, grams, norm }
    }

    pub fn side(&self) -> LoadingSide {
        self.side
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grams[0].nrows()
    }

    /// `1/(pqT) sum_s w_s G_s` over the given `(s, w_s)` pairs (1-based `s`).
    pub fn weighted_sum(&self, weights: &[(usize, f64)]) -> DMatrix<f64> {
        let n = self.dim();
        let mut acc = DMatrix::zeros(n, n);
        for &(s, w) in weights {
            add_scaled(&mut acc, w * self.norm, &self.grams[s - 1]);
        }
        acc
    }

    /// Scatter matrix at 1-based time `t` under a precomputed weight table.
    pub fn scatter(&self, table: &KernelWeights, t: usize) -> Result<DMatrix<f64>> {
        Ok(self.weighted_sum(&table.weights_at(t)?))
    }
}

/// Kernel-weighted scatter matrix at 1-based time `t`.
///
/// Two-sided specs use the boundary-corrected weights over the whole sample;
/// one-sided specs sum over the side's window only. Both carry the same
/// `1/(pqT)` normalisation.
pub fn scatter_matrix(series: &MatrixSeries, t: usize, spec: &KernelSpec, side: LoadingSide) -> Result<DMatrix<f64>> {
    let len = series.len();
    if t == 0 || t > len {
        return Err(Error::TimeOutOfRange { t, len });
    }
    let (lo, hi) = match spec.side {
        KernelSide::TwoSided => (1, len),
        _ => onesided_window(spec, t, len).ok_or(Error::DegenerateWindow { t })?,
    };
    let n = side.dim(series);
    let norm = 1.0 / (series.p() * series.q() * len) as f64;
    let mut acc = DMatrix::zeros(n, n);
    for s in lo..=hi {
        let w = match spec.side {
            KernelSide::TwoSided => boundary_weight(spec, s, t, len)?,
            _ => onesided_weight(spec, s, t, len)?,
        };
        if w == 0.0 {
            continue;
        }
        let y = &series.data()[s - 1];
        let g = match side {
            LoadingSide::Row => y * y.transpose(),
            LoadingSide::Column => y.transpose() * y,
        };
        add_scaled(&mut acc, w * norm, &g);
    }
    symmetrize(&mut acc);
    Ok(acc)
}

/// Leading-`d` eigenvectors of a symmetric matrix, scaled by `sqrt(n)`.
///
/// Each column is signed so that its largest-magnitude entry is positive,
/// which makes per-time estimates deterministic.
pub fn local_pca(m: &DMatrix<f64>, d: usize) -> Result<LocalPca> {
    let (n, nc) = m.shape();
    if n != nc {
        return Err(Error::shape("square matrix", format!("{n}x{nc}")));
    }
    if d == 0 || d > n {
        return Err(Error::invalid(format!("number of components {d} must lie in [1, {n}]")));
    }
    let scale = m.abs().max().max(1.0);
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let (mut spectrum, vecs) = sym_eigen_desc(m);
    for v in spectrum.iter_mut() {
        if *v < 0.0 && *v >= -EIG_CLAMP {
            *v = 0.0;
        }
    }
    let mut loading = vecs.columns(0, d).into_owned();
    canonical_signs(&mut loading);
    loading *= (n as f64).sqrt();
    Ok(LocalPca {
        loading,
        eigvals: spectrum[..d].to_vec(),
        spectrum,
    })
}

/// Raw local-PCA loading path for one side from precomputed Gram matrices.
pub fn estimate_side(grams: &GramSeries, spec: &KernelSpec, d: usize) -> Result<LoadingPath> {
    let len = grams.len();
    let table = KernelWeights::new(*spec, len)?;
    let fits: Vec<LocalPca> = (1..=len)
        .into_par_iter()
        .map(|t| local_pca(&grams.scatter(&table, t)?, d))
        .collect::<Result<_>>()?;
    let mut path = LoadingPath {
        side: grams.side(),
        mats: Vec::with_capacity(len),
        eigvals: Vec::with_capacity(len),
        spectrum: Vec::with_capacity(len),
        smoothed: false,
    };
    for fit in fits {
        path.mats.push(fit.loading);
        path.eigvals.push(fit.eigvals);
        path.spectrum.push(fit.spectrum);
    }
    Ok(path)
}

/// Row (`k` columns) and column (`r` columns) loading paths for every `t`.
pub fn estimate_loadings(
    series: &MatrixSeries,
    spec_row: &KernelSpec,
    spec_col: &KernelSpec,
    k: usize,
    r: usize,
) -> Result<(LoadingPath, LoadingPath)> {
    if k == 0 || k > series.p() {
        return Err(Error::invalid(format!("k = {k} must lie in [1, p = {}]", series.p())));
    }
    if r == 0 || r > series.q() {
        return Err(Error::invalid(format!("r = {r} must lie in [1, q = {}]", series.q())));
    }
    let rows = estimate_side(&GramSeries::new(series, LoadingSide::Row), spec_row, k)?;
    let cols = estimate_side(&GramSeries::new(series, LoadingSide::Column), spec_col, r)?;
    Ok((rows, cols))
}

fn check_paths(series: &MatrixSeries, rows: &LoadingPath, cols: &LoadingPath) -> Result<()> {
    let len = series.len();
    if rows.len() != len || cols.len() != len {
        return Err(Error::shape(format!("{len} time points"), format!("{} / {}", rows.len(), cols.len())));
    }
    if rows.n() != series.p() || cols.n() != series.q() {
        return Err(Error::shape(
            format!("{} x . and {} x . loadings", series.p(), series.q()),
            format!("{} x . and {} x .", rows.n(), cols.n()),
        ));
    }
    Ok(())
}

/// `F_t = R_t^T Y_t C_t / (pq)` for every `t`.
pub fn estimate_factors(series: &MatrixSeries, rows: &LoadingPath, cols: &LoadingPath) -> Result<FactorPath> {
    check_paths(series, rows, cols)?;
    let norm = 1.0 / (series.p() * series.q()) as f64;
    let mats = series
        .data()
        .iter()
        .zip(rows.mats.iter().zip(&cols.mats))
        .map(|(y, (r, c))| r.transpose() * y * c * norm)
        .collect();
    Ok(FactorPath { mats })
}

/// `S_t = R_t R_t^T Y_t C_t C_t^T / (pq)` for every `t`.
pub fn estimate_signal(series: &MatrixSeries, rows: &LoadingPath, cols: &LoadingPath) -> Result<MatrixSeries> {
    check_paths(series, rows, cols)?;
    let norm = 1.0 / (series.p() * series.q()) as f64;
    let mats = series
        .data()
        .iter()
        .zip(rows.mats.iter().zip(&cols.mats))
        .map(|(y, (r, c))| r * (r.transpose() * y * c) * c.transpose() * norm)
        .collect();
    MatrixSeries::new(mats)
}

/// Upper bound for the number of factors considered by [`estimate_rank`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KmaxRule {
    /// `floor(n / 2)`
    Half,
    /// `floor(n / 3)`
    #[default]
    Third,
    Fixed(usize),
}

impl KmaxRule {
    pub fn resolve(self, n: usize) -> usize {
        let k = match self {
            KmaxRule::Half => n / 2,
            KmaxRule::Third => n / 3,
            KmaxRule::Fixed(k) => k,
        };
        k.clamp(1, n.saturating_sub(1).max(1))
    }
}

/// Time-averaged eigenvalue-ratio rank estimate.
///
/// `spectra[t]` is the descending spectrum of the scatter matrix at `t`.
/// Returns the `j` in `1..=k_max` maximising `mean_t lambda_j / lambda_{j+1}`,
/// smaller `j` winning ties. Denominators are floored at `1e-12` times the
/// time-averaged trace so exactly low-rank inputs stay finite.
pub fn estimate_rank(spectra: &[Vec<f64>], k_max: usize) -> Result<usize> {
    Ok(eigen_ratio_profile(spectra, k_max)?.0)
}

/// Estimated rank together with the averaged ratio for each `j` in `1..=k_max`.
pub fn eigen_ratio_profile(spectra: &[Vec<f64>], k_max: usize) -> Result<(usize, Vec<f64>)> {
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let first = spectra.first().ok_or_else(|| Error::invalid("no eigenvalue paths"))?;
    let n = first.len();
    if k_max + 1 > n {
        return Err(Error::invalid(format!("k_max = {k_max} requires at least {} eigenvalues, got {n}", k_max + 1)));
    }
    if spectra.iter().any(|s| s.len() != n) {
        return Err(Error::invalid("eigenvalue paths have unequal lengths"));
    }
    let len = spectra.len() as f64;
    let mean_trace = spectra.iter().map(|s| s.iter().sum::<f64>()).sum::<f64>() / len;
    let floor = (1e-12 * mean_trace.abs()).max(f64::MIN_POSITIVE);
    let ratios: Vec<f64> = (0..k_max)
        .map(|j| spectra.iter().map(|s| s[j] / s[j + 1].max(floor)).sum::<f64>() / len)
        .collect();
    let mut best = 0;
    for j in 1..k_max {
        if ratios[j] > ratios[best] {
            best = j;
        }
    }
    Ok((best + 1, ratios))
}
