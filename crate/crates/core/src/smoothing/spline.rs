//! Cubic smoothing splines with the smoothing parameter picked by
//! generalised cross-validation.
//!
//! Uses the Reinsch formulation: for knots `x_1 < ... < x_N` the roughness
//! penalty is `g^T K g` with `K = Q R^{-1} Q^T`. Diagonalising `K = U D U^T`
//! once per knot set makes every fit on that grid cost `O(N^2)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen_desc;

const GCV_GRID: usize = 161;

/// Penalty eigenbasis for a fixed set of knots.
#[derive(Debug, Clone)]
pub struct SplineBasis {
    x: Vec<f64>,
    h: Vec<f64>,
    /// `R^{-1} Q^T`, maps fitted values to interior second derivatives.
    curvature: DMatrix<f64>,
    u: DMatrix<f64>,
    d: Vec<f64>,
    lambdas: Vec<f64>,
}

/// A fitted natural cubic spline.
#[derive(Debug, Clone)]
pub struct SmoothingSpline {
    x: Vec<f64>,
    h: Vec<f64>,
    fitted: Vec<f64>,
    /// Second derivatives at every knot, zero at both ends.
    gamma: Vec<f64>,
    pub lambda: f64,
}

impl SplineBasis {
    pub fn new(x: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 4 {
            return Err(Error::invalid(format!("smoothing spline needs at least 4 knots, got {n}")));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        if h.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("spline knots must be strictly increasing"));
        }
        let m = n - 2;
        let mut q = DMatrix::zeros(n, m);
        let mut r = DMatrix::zeros(m, m);
        for j in 0..m {
            // interior knot j + 1
            q[(j, j)] = 1.0 / h[j];
            q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
            q[(j + 2, j)] = 1.0 / h[j + 1];
            r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
            if j + 1 < m {
                r[(j, j + 1)] = h[j + 1] / 6.0;
                r[(j + 1, j)] = h[j + 1] / 6.0;
            }
        }
        let chol = r.cholesky().ok_or_else(|| Error::Numerical("spline band matrix not positive definite".into()))?;
        let curvature = chol.solve(&q.transpose());
        let mut k = &q * &curvature;
        crate::linalg::symmetrize(&mut k);
        let (mut d, u) = sym_eigen_desc(&k);
        for v in d.iter_mut() {
            *v = v.max(0.0);
        }
        let positive: Vec<f64> = d.iter().copied().filter(|v| *v > 1e-12 * d[0]).collect();
        let mean_d = positive.iter().sum::<f64>() / positive.len().max(1) as f64;
        let base = 1.0 / mean_d.max(f64::MIN_POSITIVE);
        let lambdas = (0..GCV_GRID)
            .map(|i| base * 10f64.powf(-6.0 + 16.0 * i as f64 / (GCV_GRID - 1) as f64))
            .collect();
        Ok(Self {
            x: x.to_vec(),
            h,
            curvature,
            u,
            d,
            lambdas,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Fit with a fixed smoothing parameter.
    pub fn fit(&self, y: &[f64], lambda: f64) -> Result<SmoothingSpline> {
        let z = self.project(y)?;
        Ok(self.assemble(&z, lambda))
    }

    /// Fit with the smoothing parameter minimising the GCV score over a
    /// logarithmic grid.
    pub fn fit_gcv(&self, y: &[f64]) -> Result<SmoothingSpline> {
        let z = self.project(y)?;
        let n = self.x.len() as f64;
        let mut best = (f64::INFINITY, self.lambdas[0]);
        for &lambda in &self.lambdas {
            let mut rss = 0.0;
            let mut trace = 0.0;
            for (dj, zj) in self.d.iter().zip(z.iter()) {
                let shrink = 1.0 / (1.0 + lambda * dj);
                let resid = (1.0 - shrink) * zj;
                rss += resid * resid;
                trace += shrink;
            }
            let denom = n - trace;
            let score = n * rss / (denom * denom);
            if score < best.0 {
                best = (score, lambda);
            }
        }
        Ok(self.assemble(&z, best.1))
    }

    fn project(&self, y: &[f64]) -> Result<DVector<f64>> {
        if y.len() != self.x.len() {
            return Err(Error::shape(self.x.len(), y.len()));
        }
        Ok(self.u.tr_mul(&DVector::from_column_slice(y)))
    }

    fn assemble(&self, z: &DVector<f64>, lambda: f64) -> SmoothingSpline {
        let shrunk = DVector::from_iterator(z.len(), z.iter().zip(&self.d).map(|(zj, dj)| zj / (1.0 + lambda * dj)));
        let fitted = &self.u * shrunk;
        let inner = &self.curvature * &fitted;
        let mut gamma = vec![0.0; self.x.len()];
        gamma[1..self.x.len() - 1].copy_from_slice(inner.as_slice());
        SmoothingSpline {
            x: self.x.clone(),
            h: self.h.clone(),
            fitted: fitted.as_slice().to_vec(),
            gamma,
            lambda,
        }
    }
}

impl SmoothingSpline {
    pub fn fitted(&self) -> &[f64] {
        &self.fitted
    }

    /// Evaluate the spline; linear extrapolation beyond the end knots.
    pub fn eval(&self, x0: f64) -> f64 {
        let n = self.x.len();
        let (x, g, gam, h) = (&self.x, &self.fitted, &self.gamma, &self.h);
        if x0 <= x[0] {
            let slope = (g[1] - g[0]) / h[0] - h[0] * gam[1] / 6.0;
            return g[0] + slope * (x0 - x[0]);
        }
        if x0 >= x[n - 1] {
            let slope = (g[n - 1] - g[n - 2]) / h[n - 2] + h[n - 2] * gam[n - 2] / 6.0;
            return g[n - 1] + slope * (x0 - x[n - 1]);
        }
        let i = match x.binary_search_by(|v| v.total_cmp(&x0)) {
            Ok(i) => return g[i],
            Err(i) => i - 1,
        };
        let hi = h[i];
        let dl = x0 - x[i];
        let dr = x[i + 1] - x0;
        (dl * g[i + 1] + dr * g[i]) / hi - dl * dr / 6.0 * ((1.0 + dl / hi) * gam[i + 1] + (1.0 + dr / hi) * gam[i])
    }
}
