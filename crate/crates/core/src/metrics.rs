//! Evaluation metrics for simulation studies.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimation::{LoadingPath, LoadingSide};
use crate::kernels::KernelWeights;
use crate::smoothing::CoalescingRegion;

/// Frobenius distance between the orthogonal projectors onto the column
/// spaces of `a_hat` and `a`.
pub fn space_distance(a_hat: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<f64> {
    if a_hat.shape() != a.shape() {
        return Err(Error::shape(
            format!("{}x{}", a.nrows(), a.ncols()),
            format!("{}x{}", a_hat.nrows(), a_hat.ncols()),
        ));
    }
    let p_hat = crate::linalg::column_projector(a_hat)?;
    let p = crate::linalg::column_projector(a)?;
    Ok((p_hat - p).norm())
}

/// Per-time column-space distances between two loading paths.
pub fn space_distances(path_hat: &LoadingPath, path_true: &LoadingPath) -> Result<Vec<f64>> {
    if path_hat.len() != path_true.len() {
        return Err(Error::shape(format!("{} time points", path_true.len()), path_hat.len()));
    }
    path_hat
        .mats
        .iter()
        .zip(&path_true.mats)
        .map(|(h, a)| space_distance(h, a))
        .collect()
}

/// Time-averaged column-space distance.
pub fn avg_space_distance(path_hat: &LoadingPath, path_true: &LoadingPath) -> Result<f64> {
    let d = space_distances(path_hat, path_true)?;
    if d.is_empty() {
        return Err(Error::invalid("empty loading paths"));
    }
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Rotation matrices `H_t` that map the true loadings onto the estimated
/// ones, available only when the data-generating truth is known.
///
/// For the row side,
/// `H_t = 1/(Tpq) sum_s K(t, s) F_s C_t^T C_t F_s^T R_t^T R_hat_t V_t^{-1}`;
/// the column side swaps the roles of `R` and `C` and transposes `F_s`.
/// `eigvals[t]` must hold the leading eigenvalues `V_t` used by the estimate.
pub struct RotationInputs<'a> {
    pub rows_true: &'a [DMatrix<f64>],
    pub cols_true: &'a [DMatrix<f64>],
    pub factors_true: &'a [DMatrix<f64>],
    pub estimate: &'a LoadingPath,
}

pub fn rotation_oracle(inputs: &RotationInputs<'_>, weights: &KernelWeights) -> Result<Vec<DMatrix<f64>>> {
    let est = inputs.estimate;
    let len = est.len();
    if inputs.rows_true.len() != len || inputs.cols_true.len() != len || inputs.factors_true.len() != len {
        return Err(Error::shape(format!("{len} time points"), "truth of different length"));
    }
    if weights.len() != len {
        return Err(Error::shape(format!("{len} time points"), format!("weights for {}", weights.len())));
    }
    if est.eigvals.len() != len {
        return Err(Error::invalid("estimate carries no eigenvalues"));
    }
    let p = inputs.rows_true[0].nrows();
    let q = inputs.cols_true[0].nrows();
    let norm = 1.0 / (len * p * q) as f64;
    let mut out = Vec::with_capacity(len);
    for t in 1..=len {
        let (own, other) = match est.side {
            LoadingSide::Row => (&inputs.rows_true[t - 1], &inputs.cols_true[t - 1]),
            LoadingSide::Column => (&inputs.cols_true[t - 1], &inputs.rows_true[t - 1]),
        };
        let other_gram = other.transpose() * other;
        let d = own.ncols();
        let mut acc = DMatrix::zeros(d, d);
        for (s, w) in weights.weights_at(t)? {
            let f = &inputs.factors_true[s - 1];
            let term = match est.side {
                LoadingSide::Row => f * &other_gram * f.transpose(),
                LoadingSide::Column => f.transpose() * &other_gram * f,
            };
            crate::linalg::add_scaled(&mut acc, w * norm, &term);
        }
        let vals = &est.eigvals[t - 1];
        if vals.iter().any(|v| v.abs() < f64::MIN_POSITIVE * 1e6) {
            return Err(Error::Numerical(format!("singular eigenvalue matrix at t = {t}")));
        }
        let mut h = acc * own.transpose() * &est.mats[t - 1];
        for (j, v) in vals.iter().enumerate() {
            h.column_mut(j).unscale_mut(*v);
        }
        out.push(h);
    }
    Ok(out)
}

/// `||A_hat_t - A_t H_t||_F^2 / n` for each `t`.
pub fn rotation_residuals(estimate: &LoadingPath, truth: &[DMatrix<f64>], rotations: &[DMatrix<f64>]) -> Vec<f64> {
    estimate
        .mats
        .iter()
        .zip(truth.iter().zip(rotations))
        .map(|(hat, (a, h))| (hat - a * h).norm_squared() / hat.nrows() as f64)
        .collect()
}

/// Classification of detected coalescing regions against known crossing points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionClassification {
    /// Number of regions containing each truth point.
    pub true_positives: Vec<usize>,
    /// Regions containing none of the truth points.
    pub false_positives: usize,
}

impl RegionClassification {
    /// Whether truth point `i` is covered by at least one region.
    pub fn detected(&self, i: usize) -> bool {
        self.true_positives[i] > 0
    }
}

/// Match regions `(a, b]` against truth points `u` in `(0, 1)`: point `u`
/// lies in a region when `ceil(u T)` falls in `(a, b]`.
pub fn classify_regions(found: &[CoalescingRegion], truth_points: &[f64], len: usize) -> Result<RegionClassification> {
    if let Some(u) = truth_points.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
        return Err(Error::invalid(format!("truth point {u} outside (0, 1)")));
    }
    let idx: Vec<usize> = truth_points.iter().map(|u| (u * len as f64).ceil() as usize).collect();
    let mut true_positives = vec![0; truth_points.len()];
    let mut false_positives = 0;
    for region in found {
        let mut hit = false;
        for (i, &t) in idx.iter().enumerate() {
            if region.contains(t) {
                true_positives[i] += 1;
                hit = true;
            }
        }
        if !hit {
            false_positives += 1;
        }
    }
    Ok(RegionClassification {
        true_positives,
        false_positives,
    })
}
