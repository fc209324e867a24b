//! Turning per-time PCA output into smooth loading functions.
//!
//! Raw local-PCA loadings are only identified up to column signs, and when
//! two eigenvalue curves cross the order of the corresponding columns flips.
//! This module
//!
//! 1. locates order switches with a left/right kernel comparison
//!    ([`detect_switches`]), giving coalescing regions `(a, b]`;
//! 2. undoes the switches and sign flips, re-fits the loadings inside each
//!    region with smoothing splines and re-orthonormalises
//!    ([`repair_and_smooth`]);
//! 3. removes the remaining global rotation with varimax
//!    ([`apply_global_rotation`]).
//!
//! A bootstrap eigenvalue-band detector ([`mvp_bootstrap_regions`]) is
//! provided as a baseline for step 1.

pub mod spline;
pub mod varimax;

use std::ops::RangeInclusive;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{GramSeries, LoadingPath, LoadingSide, MatrixSeries};
use crate::kernels::{KernelSide, KernelSpec, KernelWeights};
use crate::linalg::{gram_schmidt, sym_eigen_desc};
use crate::stats::quantile;

pub use spline::{SmoothingSpline, SplineBasis};
pub use varimax::{varimax, varimax_criterion, VarimaxResult};

/// A coalescing region `(a, b]` in which columns `kappa` and `kappa + 1`
/// (1-based) are not reliably ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoalescingRegion {
    /// Exclusive start.
    pub a: usize,
    /// Inclusive end.
    pub b: usize,
    pub kappa: usize,
}

impl CoalescingRegion {
    pub fn contains(&self, t: usize) -> bool {
        self.a < t && t <= self.b
    }

    pub fn times(&self) -> RangeInclusive<usize> {
        self.a + 1..=self.b
    }

    pub fn len(&self) -> usize {
        self.b - self.a
    }

    pub fn is_empty(&self) -> bool {
        self.b <= self.a
    }
}

/// How the exceedance threshold is derived from the statistics' spread.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ThresholdRule {
    /// `max(c IQR_i, c IQR_global)`.
    #[default]
    IqrMultiple,
    /// Tukey fence `Q3_i + c max(IQR_i, IQR_global)`.
    TukeyFence,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub rule: ThresholdRule,
    pub iqr_multiplier: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            rule: ThresholdRule::default(),
            iqr_multiplier: 1.5,
        }
    }
}

/// Output of [`detect_switches`].
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchDiagnostics {
    /// `stats[i - 1][t - 1]` is `T_{i,t}`; `None` where a one-sided window
    /// does not fit inside the sample.
    pub stats: Vec<Vec<Option<f64>>>,
    pub thresholds: Vec<f64>,
    /// 0.95 quantile of each statistic, a reference line for plots.
    pub upper_q95: Vec<f64>,
    pub regions: Vec<CoalescingRegion>,
}

impl SwitchDiagnostics {
    pub fn empty(len: usize) -> Self {
        let _ = len;
        Self {
            stats: Vec::new(),
            thresholds: Vec::new(),
            upper_q95: Vec::new(),
            regions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.stats.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }
}

/// Switch statistic computed from projector differences:
///
/// `||P(l_i) - P(r_i)||^2 + ||P(l_{i+1}) - P(r_{i+1})||^2 - ||P(l_i, l_{i+1}) - P(r_i, r_{i+1})||^2`
///
/// where `l`, `r` are the (unit-norm) left and right eigenvectors and `P(.)`
/// the outer-product projector. Lies in `[0, 4]`; 4 means the two columns
/// are exactly swapped. `i` is 1-based.
pub fn switch_statistic(left: &DMatrix<f64>, right: &DMatrix<f64>, i: usize) -> Result<f64> {
    check_switch_args(left, right, i)?;
    let (a, b) = (i - 1, i);
    let proj = |m: &DMatrix<f64>, cols: &[usize]| {
        let n = m.nrows();
        let mut p = DMatrix::zeros(n, n);
        for &c in cols {
            let v = m.column(c);
            p.ger(1.0, &v, &v, 1.0);
        }
        p
    };
    let single_a = (proj(left, &[a]) - proj(right, &[a])).norm_squared();
    let single_b = (proj(left, &[b]) - proj(right, &[b])).norm_squared();
    let joint = (proj(left, &[a, b]) - proj(right, &[a, b])).norm_squared();
    Ok((single_a + single_b - joint).clamp(0.0, 4.0))
}

/// Equivalent form for orthonormal inputs:
/// `2 [(l_i . r_{i+1})^2 + (l_{i+1} . r_i)^2]`.
pub fn switch_statistic_swapped(left: &DMatrix<f64>, right: &DMatrix<f64>, i: usize) -> Result<f64> {
    check_switch_args(left, right, i)?;
    let x = left.column(i - 1).dot(&right.column(i));
    let y = left.column(i).dot(&right.column(i - 1));
    Ok(2.0 * (x * x + y * y))
}

fn check_switch_args(left: &DMatrix<f64>, right: &DMatrix<f64>, i: usize) -> Result<()> {
    if left.shape() != right.shape() {
        return Err(Error::shape(
            format!("{}x{}", left.nrows(), left.ncols()),
            format!("{}x{}", right.nrows(), right.ncols()),
        ));
    }
    if i == 0 || i + 1 > left.ncols() {
        return Err(Error::invalid(format!("column index {i} outside [1, {}]", left.ncols().saturating_sub(1))));
    }
    Ok(())
}

/// Maximal runs of `flags[t - 1] == true` as regions `(a, b]` with the given `kappa`.
pub fn runs_to_regions(flags: &[bool], kappa: usize) -> Vec<CoalescingRegion> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (idx, &f) in flags.iter().enumerate() {
        let t = idx + 1;
        match (f, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                out.push(CoalescingRegion { a: s - 1, b: t - 1, kappa });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(CoalescingRegion { a: s - 1, b: flags.len(), kappa });
    }
    out
}

/// Left/right switch detection with the default IQR thresholds.
pub fn detect_switches(
    series: &MatrixSeries,
    spec: &KernelSpec,
    side: LoadingSide,
    d: usize,
) -> Result<SwitchDiagnostics> {
    detect_switches_with(series, spec, side, d, &DetectOptions::default())
}

/// Compare the leading eigenvectors of the left and right one-sided scatter
/// matrices at every `t` whose windows fit entirely inside the sample, and
/// flag runs where `T_{i,t}` exceeds its threshold.
///
/// Only `spec.family` and `spec.bandwidth` are used; the side is ignored.
pub fn detect_switches_with(
    series: &MatrixSeries,
    spec: &KernelSpec,
    side: LoadingSide,
    d: usize,
    opts: &DetectOptions,
) -> Result<SwitchDiagnostics> {
    let len = series.len();
    let n = side.dim(series);
    if d < 2 {
        return Ok(SwitchDiagnostics::empty(len));
    }
    if d > n {
        return Err(Error::invalid(format!("d = {d} exceeds dimension {n}")));
    }
    let left = KernelWeights::new(spec.with_side(KernelSide::Left), len)?;
    let right = KernelWeights::new(spec.with_side(KernelSide::Right), len)?;
    let w = spec.half_width(len);
    let grams = GramSeries::new(series, side);
    let core: Vec<usize> = if w >= 1 && 2 * w < len { (w + 1..=len - w).collect() } else { Vec::new() };

    let per_t: Vec<Vec<f64>> = core
        .par_iter()
        .map(|&t| {
            let lm = grams.weighted_sum(&left.weights_at(t)?);
            let rm = grams.weighted_sum(&right.weights_at(t)?);
            let lv = sym_eigen_desc(&lm).1.columns(0, d).into_owned();
            let rv = sym_eigen_desc(&rm).1.columns(0, d).into_owned();
            (1..d).map(|i| switch_statistic(&lv, &rv, i)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut stats = vec![vec![None; len]; d - 1];
    for (&t, vals) in core.iter().zip(&per_t) {
        for (i, v) in vals.iter().enumerate() {
            stats[i][t - 1] = Some(*v);
        }
    }
    let thresholds = thresholds_for(&stats, opts);
    let upper_q95 = stats
        .iter()
        .map(|row| {
            let vals: Vec<f64> = row.iter().flatten().copied().collect();
            quantile(&vals, 0.95).unwrap_or(f64::NAN)
        })
        .collect();
    let mut regions = Vec::new();
    for (i, row) in stats.iter().enumerate() {
        let flags: Vec<bool> = row.iter().map(|v| v.is_some_and(|x| x > thresholds[i])).collect();
        regions.extend(runs_to_regions(&flags, i + 1));
    }
    Ok(SwitchDiagnostics {
        stats,
        thresholds,
        upper_q95,
        regions,
    })
}

fn thresholds_for(stats: &[Vec<Option<f64>>], opts: &DetectOptions) -> Vec<f64> {
    let all: Vec<f64> = stats.iter().flatten().flatten().copied().collect();
    let iqr = |v: &[f64]| match (quantile(v, 0.25), quantile(v, 0.75)) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let global = iqr(&all);
    stats
        .iter()
        .map(|row| {
            let vals: Vec<f64> = row.iter().flatten().copied().collect();
            let own = iqr(&vals);
            match opts.rule {
                ThresholdRule::IqrMultiple => opts.iqr_multiplier * own.max(global),
                ThresholdRule::TukeyFence => {
                    quantile(&vals, 0.75).unwrap_or(0.0) + opts.iqr_multiplier * own.max(global)
                }
            }
        })
        .collect()
}

/// Options for [`mvp_bootstrap_regions`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub n_boot: usize,
    /// Percentile (in percent) of the band bounds.
    pub percentile: f64,
    pub seed: u64,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            n_boot: 100,
            percentile: 5.0,
            seed: 0,
        }
    }
}

/// Bootstrap eigenvalue-band detector of coalescing regions.
///
/// At each `t` the local model `R_t Lambda_t^{1/2} Z_s`, with `Z_s` a
/// Gaussian white-noise `d`-vector, is resampled over the kernel window.
/// Because the estimated loadings are orthonormal, the resampled leading
/// eigenvalues are those of `Lambda^{1/2} W Lambda^{1/2}` with `W` a Wishart
/// matrix whose degrees of freedom equal the kernel's effective sample size
/// `(sum w)^2 / sum w^2`. A time point is flagged for pair
/// `(j, j+1)` when the lower `percentile` band of `lambda_j` falls below the
/// upper band of `lambda_{j+1}`.
pub fn mvp_bootstrap_regions(
    series: &MatrixSeries,
    spec: &KernelSpec,
    side: LoadingSide,
    d: usize,
    opts: &BootstrapOptions,
) -> Result<Vec<CoalescingRegion>> {
    let len = series.len();
    let n = side.dim(series);
    if d < 2 {
        return Ok(Vec::new());
    }
    if d > n {
        return Err(Error::invalid(format!("d = {d} exceeds dimension {n}")));
    }
    if opts.n_boot < 2 || !(opts.percentile > 0.0 && opts.percentile < 50.0) {
        return Err(Error::invalid("bootstrap needs n_boot >= 2 and a percentile in (0, 50)"));
    }
    let table = KernelWeights::new(spec.with_side(KernelSide::TwoSided), len)?;
    let grams = GramSeries::new(series, side);
    let lo_q = opts.percentile / 100.0;
    let hi_q = 1.0 - lo_q;

    let flags: Vec<Vec<bool>> = (1..=len)
        .into_par_iter()
        .map(|t| {
            let weights = table.weights_at(t)?;
            let (sw, sw2) = weights.iter().fold((0.0, 0.0), |(a, b), (_, w)| (a + w, b + w * w));
            let dof = (sw * sw / sw2).max(d as f64);
            let (vals, _) = sym_eigen_desc(&grams.weighted_sum(&weights));
            let roots: Vec<f64> = vals[..d].iter().map(|v| v.max(0.0).sqrt()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(t as u64);
            let mut draws = vec![Vec::with_capacity(opts.n_boot); d];
            for _ in 0..opts.n_boot {
                let w = wishart_bartlett(d, dof, &mut rng)?;
                let scaled = DMatrix::from_fn(d, d, |i, j| roots[i] * w[(i, j)] * roots[j]);
                let (ev, _) = sym_eigen_desc(&scaled);
                for (j, v) in ev.into_iter().enumerate() {
                    draws[j].push(v);
                }
            }
            Ok((0..d - 1)
                .map(|j| {
                    let lower = quantile(&draws[j], lo_q).unwrap_or(0.0);
                    let upper = quantile(&draws[j + 1], hi_q).unwrap_or(0.0);
                    lower <= upper
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut regions = Vec::new();
    for j in 0..d - 1 {
        let row: Vec<bool> = flags.iter().map(|f| f[j]).collect();
        regions.extend(runs_to_regions(&row, j + 1));
    }
    Ok(regions)
}

/// Draw `W / dof` with `W ~ Wishart_d(dof, I)` by the Bartlett decomposition.
fn wishart_bartlett<R: Rng>(d: usize, dof: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(dof - i as f64).map_err(|e| Error::Numerical(e.to_string()))?;
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    Ok(&a * a.transpose() / dof)
}

/// Options controlling the spline re-fit inside coalescing regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairOptions {
    /// Number of reliable time points used on each side of a region is
    /// `clamp(region length, min_context, max_context)`.
    pub min_context: usize,
    pub max_context: usize,
}

impl Default for RepairOptions {
    fn default() -> Self {
        Self {
            min_context: 20,
            max_context: 150,
        }
    }
}

/// Undo order switches and sign flips, re-fit the loadings inside coalescing
/// regions and re-orthonormalise. See [`repair_and_smooth_with`].
pub fn repair_and_smooth(raw: &LoadingPath, diag: &SwitchDiagnostics) -> Result<LoadingPath> {
    repair_and_smooth_with(raw, &diag.regions, &RepairOptions::default())
}

/// Repair a raw loading path given coalescing regions.
///
/// 1. For each `kappa` in increasing order, columns `kappa` and `kappa + 1`
///    are swapped at every `t` after each of its regions (cumulative parity).
/// 2. Column signs are aligned over time; each column is compared with its
///    last value outside any region that touches it.
/// 3. Inside each region, the entries of both affected columns are replaced
///    by a GCV smoothing spline fitted to nearby values outside the regions.
/// 4. Each `A_t` is re-orthonormalised by Gram-Schmidt, first column first,
///    keeping the `sqrt(n)` column scale.
pub fn repair_and_smooth_with(
    raw: &LoadingPath,
    regions: &[CoalescingRegion],
    opts: &RepairOptions,
) -> Result<LoadingPath> {
    let len = raw.len();
    let d = raw.d();
    let n = raw.n();
    if len == 0 {
        return Err(Error::invalid("empty loading path"));
    }
    let regions: Vec<CoalescingRegion> = regions
        .iter()
        .copied()
        .filter(|r| r.kappa >= 1 && r.kappa < d && !r.is_empty())
        .collect();
    for r in &regions {
        if r.a == 0 && r.b >= len {
            return Err(Error::Unrepairable(format!("region ({}, {}] covers the whole sample", r.a, r.b)));
        }
        if r.b > len {
            return Err(Error::invalid(format!("region ({}, {}] exceeds T = {len}", r.a, r.b)));
        }
    }
    let mut mats = raw.mats.clone();
    let mut eigvals = raw.eigvals.clone();

    // 1. switches
    let mut ordered = regions.clone();
    ordered.sort_by_key(|r| (r.kappa, r.b, r.a));
    for r in &ordered {
        let (c0, c1) = (r.kappa - 1, r.kappa);
        for t in r.b..len {
            mats[t].swap_columns(c0, c1);
            if let Some(ev) = eigvals.get_mut(t) {
                if ev.len() > c1 {
                    ev.swap(c0, c1);
                }
            }
        }
    }

    // times at which each column is unreliable
    let mut unreliable = vec![vec![false; len]; d];
    for r in &regions {
        for c in [r.kappa - 1, r.kappa] {
            for t in r.times() {
                unreliable[c][t - 1] = true;
            }
        }
    }

    // 2. signs
    for c in 0..d {
        let mut reference = 0usize;
        for t in 1..len {
            let dot = mats[t].column(c).dot(&mats[reference].column(c));
            if dot < 0.0 {
                mats[t].column_mut(c).neg_mut();
            }
            if !unreliable[c][t] || unreliable[c][reference] {
                reference = t;
            }
        }
    }

    // 3. spline re-fit inside regions
    for r in &regions {
        let span = r.len().clamp(opts.min_context, opts.max_context);
        for c in [r.kappa - 1, r.kappa] {
            let lo = r.a.saturating_sub(span).max(1);
            let hi = (r.b + span).min(len);
            let knots: Vec<usize> = (lo..=hi).filter(|&t| !r.contains(t) && !unreliable[c][t - 1]).collect();
            if knots.len() < 4 {
                return Err(Error::Unrepairable(format!(
                    "too few reliable points around region ({}, {}] for column {}",
                    r.a,
                    r.b,
                    c + 1
                )));
            }
            let x: Vec<f64> = knots.iter().map(|&t| t as f64).collect();
            let basis = SplineBasis::new(&x)?;
            for row in 0..n {
                let y: Vec<f64> = knots.iter().map(|&t| mats[t - 1][(row, c)]).collect();
                let fit = basis.fit_gcv(&y)?;
                for t in r.times() {
                    mats[t - 1][(row, c)] = fit.eval(t as f64);
                }
            }
        }
    }

    // 4. re-orthonormalise
    let root_n = (n as f64).sqrt();
    for (t, m) in mats.iter_mut().enumerate() {
        let unit = &*m / root_n;
        let q = gram_schmidt(&unit).map_err(|_| Error::Numerical(format!("loading columns collapsed at t = {}", t + 1)))?;
        *m = q * root_n;
    }

    Ok(LoadingPath {
        side: raw.side,
        mats,
        eigvals,
        spectrum: raw.spectrum.clone(),
        smoothed: true,
    })
}

/// Varimax over the loadings in `window` (1-based, inclusive), stacked into
/// one `(n |window|) x d` matrix; the resulting rotation is applied to every
/// time point. Returns the rotated path and the rotation.
pub fn apply_global_rotation(
    path: &LoadingPath,
    window: RangeInclusive<usize>,
) -> Result<(LoadingPath, VarimaxResult)> {
    let (start, end) = (*window.start(), *window.end());
    if start == 0 || start > end || end > path.len() {
        return Err(Error::invalid(format!("varimax window [{start}, {end}] invalid for T = {}", path.len())));
    }
    let (n, d) = (path.n(), path.d());
    let count = end + 1 - start;
    let mut stacked = DMatrix::zeros(n * count, d);
    for (k, t) in window.enumerate() {
        stacked.view_mut((k * n, 0), (n, d)).copy_from(&path.mats[t - 1]);
    }
    let res = varimax(&stacked, varimax::DEFAULT_TOL, varimax::DEFAULT_MAX_ITER)?;
    let mats = path.mats.iter().map(|m| m * &res.rotation).collect();
    Ok((
        LoadingPath {
            side: path.side,
            mats,
            eigvals: path.eigvals.clone(),
            spectrum: path.spectrum.clone(),
            smoothed: path.smoothed,
        },
        res,
    ))
}
