//! Synthetic data for the Monte Carlo studies.
//!
//! Every generator draws from a ChaCha stream selected by `(seed, rep)`, so a
//! replication is reproducible on its own and replications are independent.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::estimation::{LoadingSide, MatrixSeries};
use crate::linalg::{gram_schmidt, polar_factor};

/// AR coefficient of the factor process.
pub const FACTOR_AR: f64 = 0.1;
const COALESCING_W: f64 = 0.75;
const COALESCING_PHI: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dgp {
    Dgp1,
    Dgp2,
    Coalescing,
}

/// Factor process of the coalescing design.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scenario {
    /// Stationary VAR(1) factors.
    #[default]
    S0,
    /// VAR(1) factors plus a linear trend.
    S1,
    /// Deterministic linear trend only.
    S2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dgp: Dgp,
    pub p: usize,
    pub q: usize,
    /// Sample length `T`.
    pub len: usize,
    pub k: usize,
    pub r: usize,
    /// AR coefficient of the noise.
    pub psi: f64,
    /// Signal-to-noise ratio `alpha^2`, coalescing design only.
    pub snr_alpha2: f64,
    pub scenario: Scenario,
    pub seed: u64,
    pub n_reps: usize,
}

impl ExperimentConfig {
    /// DGP1/DGP2 configuration with `k = r = 2`.
    pub fn standard(dgp: Dgp, p: usize, q: usize, len: usize, psi: f64) -> Self {
        Self {
            dgp,
            p,
            q,
            len,
            k: 2,
            r: 2,
            psi,
            snr_alpha2: 1.0,
            scenario: Scenario::S0,
            seed: 0,
            n_reps: 1,
        }
    }

    /// Coalescing configuration with `k = r = 4` and the given noise share
    /// `1 / (1 + alpha^2)`.
    pub fn coalescing(p: usize, q: usize, len: usize, psi: f64, noise_share: f64, scenario: Scenario) -> Self {
        Self {
            dgp: Dgp::Coalescing,
            p,
            q,
            len,
            k: 4,
            r: 4,
            psi,
            snr_alpha2: 1.0 / noise_share - 1.0,
            scenario,
            seed: 0,
            n_reps: 1,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_reps(mut self, n_reps: usize) -> Self {
        self.n_reps = n_reps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.psi) {
            return Err(Error::invalid(format!("psi = {} must lie in [0, 1)", self.psi)));
        }
        if self.len < 2 {
            return Err(Error::invalid("T must be at least 2"));
        }
        if self.k == 0 || self.r == 0 || self.k > self.p || self.r > self.q {
            return Err(Error::invalid(format!(
                "need 1 <= k <= p and 1 <= r <= q, got k = {}, r = {}, p = {}, q = {}",
                self.k, self.r, self.p, self.q
            )));
        }
        match self.dgp {
            Dgp::Dgp1 | Dgp::Dgp2 if self.k != 2 || self.r != 2 => {
                Err(Error::invalid("DGP1 and DGP2 are defined for k = r = 2"))
            }
            Dgp::Coalescing if self.k != 4 || self.r != 4 => {
                Err(Error::invalid("the coalescing design is defined for k = r = 4"))
            }
            Dgp::Coalescing if !(self.snr_alpha2 > 0.0 && self.snr_alpha2.is_finite()) => {
                Err(Error::invalid(format!("alpha^2 = {} must be positive", self.snr_alpha2)))
            }
            _ => Ok(()),
        }
    }
}

/// Known structure behind a simulated series: `Y_t = R_t F_t C_t^T + E_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub rows: Vec<DMatrix<f64>>,
    pub cols: Vec<DMatrix<f64>>,
    /// Factors including any signal scaling.
    pub factors: Vec<DMatrix<f64>>,
    /// Diagonal of the eigenvalue function matrix of the studied side
    /// (coalescing design only).
    pub lambda: Vec<[f64; 4]>,
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub series: MatrixSeries,
    pub truth: Truth,
}

/// RNG for replication `rep` of an experiment seeded with `seed`.
pub fn rep_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Stationary VAR(1) `x_t = phi x_{t-1} + sqrt(1 - phi^2) u_t` with unit
/// marginal variance, started from the stationary law. Returns `x_1..x_T`.
pub fn gen_var1(dim: usize, len: usize, phi: f64, seed: u64) -> Result<Vec<DVector<f64>>> {
    gen_var1_with(dim, len, phi, &mut rep_rng(seed, 0))
}

pub fn gen_var1_with<R: Rng>(dim: usize, len: usize, phi: f64, rng: &mut R) -> Result<Vec<DVector<f64>>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::invalid(format!("|phi| = {} must be below 1", phi.abs())));
    }
    let innov = (1.0 - phi * phi).sqrt();
    let mut x = normal_vec(dim, rng);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let u = normal_vec(dim, rng);
        x = x * phi + u * innov;
        out.push(x.clone());
    }
    Ok(out)
}

fn normal_vec<R: Rng>(dim: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| StandardNormal.sample(rng))
}

fn normal_mat<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `n x d` matrix with orthonormal columns from Gram-Schmidt on a Gaussian draw.
pub fn random_orthonormal<R: Rng>(n: usize, d: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    gram_schmidt(&normal_mat(n, d, rng))
}

/// Row-side drift `G(u) = 2u + exp(-16 (u - 0.5)^2) - 1`.
pub fn g_curve(u: f64) -> f64 {
    2.0 * u + (-16.0 * (u - 0.5).powi(2)).exp() - 1.0
}

/// Column-side drift `H(u) = 0.2 exp(-0.7 + 3.5 u)`.
pub fn h_curve(u: f64) -> f64 {
    0.2 * (-0.7 + 3.5 * u).exp()
}

/// Logistic curve `1 / (1 + exp(-kappa (tau - gamma)))`.
pub fn logistic(tau: f64, kappa: f64, gamma: f64) -> f64 {
    1.0 / (1.0 + (-kappa * (tau - gamma)).exp())
}

fn factor_and_noise<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    let f = gen_var1_with(cfg.k * cfg.r, cfg.len, FACTOR_AR, rng)?
        .into_iter()
        .map(|v| DMatrix::from_column_slice(cfg.k, cfg.r, v.as_slice()))
        .collect();
    let e = noise(cfg, rng)?;
    Ok((f, e))
}

fn noise<R: Rng>(cfg: &ExperimentConfig, rng: &mut R) -> Result<Vec<DMatrix<f64>>> {
    Ok(gen_var1_with(cfg.p * cfg.q, cfg.len, cfg.psi, rng)?
        .into_iter()
        .map(|v| DMatrix::from_column_slice(cfg.p, cfg.q, v.as_slice()))
        .collect())
}

fn assemble(rows: Vec<DMatrix<f64>>, cols: Vec<DMatrix<f64>>, factors: Vec<DMatrix<f64>>, noise: Vec<DMatrix<f64>>, lambda: Vec<[f64; 4]>) -> Result<Simulated> {
    let data = rows
        .iter()
        .zip(&cols)
        .zip(&factors)
        .zip(noise)
        .map(|(((r, c), f), e)| r * f * c.transpose() + e)
        .collect();
    Ok(Simulated {
        series: MatrixSeries::new(data)?,
        truth: Truth {
            rows,
            cols,
            factors,
            lambda,
        },
    })
}

/// Two-column loadings `[base_1 + a(t) 1, base_2 + b(t, i)]`.
fn drifting_loadings(base: &DMatrix<f64>, len: usize, entry: impl Fn(usize, usize, f64) -> (f64, f64)) -> Vec<DMatrix<f64>> {
    (1..=len)
        .map(|t| {
            let u = t as f64 / len as f64;
            DMatrix::from_fn(base.nrows(), 2, |i, j| {
                let (d1, d2) = entry(i + 1, t, u);
                base[(i, j)] + if j == 0 { d1 } else { d2 }
            })
        })
        .collect()
}

/// DGP1: uniform constant loadings; the second column of `R_t` drifts by
/// `G(t/T)` and that of `C_t` by `H(t/T)`.
pub fn gen_dgp1(cfg: &ExperimentConfig, rep: u64) -> Result<Simulated> {
    cfg.validate()?;
    let mut rng = rep_rng(cfg.seed, rep);
    let unif = Uniform::new(-1.0, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let r0 = DMatrix::from_fn(cfg.p, 2, |_, _| unif.sample(&mut rng));
    let c0 = DMatrix::from_fn(cfg.q, 2, |_, _| unif.sample(&mut rng));
    let rows = drifting_loadings(&r0, cfg.len, |_, _, u| (0.0, g_curve(u)));
    let cols = drifting_loadings(&c0, cfg.len, |_, _, u| (0.0, h_curve(u)));
    let (f, e) = factor_and_noise(cfg, &mut rng)?;
    assemble(rows, cols, f, e, Vec::new())
}

/// DGP2: Gaussian constant first columns drifting by `G`/`H`, and logistic
/// second columns `logistic(10 t/T; 2; 5 i/n + 2)`.
pub fn gen_dgp2(cfg: &ExperimentConfig, rep: u64) -> Result<Simulated> {
    cfg.validate()?;
    let mut rng = rep_rng(cfg.seed, rep);
    let r0 = normal_mat(cfg.p, 2, &mut rng);
    let c0 = normal_mat(cfg.q, 2, &mut rng);
    // the second base column is overwritten by the logistic curve
    let (p, q) = (cfg.p as f64, cfg.q as f64);
    let rows = drifting_loadings(&r0.columns(0, 1).insert_column(1, 0.0), cfg.len, |i, _, u| {
        (g_curve(u), logistic(10.0 * u, 2.0, 5.0 * i as f64 / p + 2.0))
    });
    let cols = drifting_loadings(&c0.columns(0, 1).insert_column(1, 0.0), cfg.len, |j, _, u| {
        (h_curve(u), logistic(10.0 * u, 2.0, 5.0 * j as f64 / q + 2.0))
    });
    let (f, e) = factor_and_noise(cfg, &mut rng)?;
    assemble(rows, cols, f, e, Vec::new())
}

/// Diagonal of the row eigenvalue function at `u = t/T`.
pub fn lambda_row(u: f64) -> [f64; 4] {
    let c = (PI * u).cos();
    [3.5 - 1.5 * c, 3.0 - 1.5 * c, 0.5 * (1.0 + c), 0.5 * (1.0 - c)]
}

/// Diagonal of the column eigenvalue function at `u = t/T`.
pub fn lambda_col(u: f64) -> [f64; 4] {
    let c = (PI * u).cos();
    [4.0 - c, 3.0 - 1.5 * c, 1.25 * (1.0 + c), 0.5 + 0.5 * (1.5 * PI * u).cos()]
}

/// A point where two eigenvalue curves meet; `kappa` is the 1-based position
/// of the upper of the two in the descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub u: f64,
    pub kappa: usize,
}

/// Crossings of the curves of `lambda` on `(0, 1)`, by sign changes on a fine
/// grid refined with bisection, in increasing `u`.
pub fn crossing_points(lambda: fn(f64) -> [f64; 4]) -> Vec<Crossing> {
    const GRID: usize = 10_000;
    let mut out = Vec::new();
    for a in 0..4 {
        for b in a + 1..4 {
            let diff = |u: f64| {
                let l = lambda(u);
                l[a] - l[b]
            };
            for g in 0..GRID {
                let (mut lo, mut hi) = (g as f64 / GRID as f64, (g + 1) as f64 / GRID as f64);
                let (dl, dh) = (diff(lo), diff(hi));
                if dl == 0.0 || dl.signum() == dh.signum() {
                    continue;
                }
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if diff(mid).signum() == dl.signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let u = 0.5 * (lo + hi);
                let l = lambda(u);
                let level = l[a].max(l[b]);
                let above = (0..4).filter(|&j| j != a && j != b && l[j] > level).count();
                out.push(Crossing { u, kappa: above + 1 });
            }
        }
    }
    out.sort_by(|x, y| x.u.total_cmp(&y.u));
    out
}

/// The `4 x 4` matrix whose orthonormal polar factor gives the coalescing
/// loadings before the random embedding.
pub fn coalescing_basis(u: f64) -> DMatrix<f64> {
    let s = (2.0f64 / 3.0).sqrt();
    DMatrix::from_fn(4, 4, |row, j| {
        let theta = j as f64 * PI * COALESCING_W * u;
        s * match row {
            0 => (theta - COALESCING_PHI).sin(),
            1 => (theta - COALESCING_PHI).cos(),
            2 => (theta - COALESCING_PHI).exp(),
            _ => (-theta - COALESCING_PHI).exp(),
        }
    })
}

/// Orthonormal coalescing loadings `U Q_t (Q_t^T Q_t)^{-1/2}` for `t = 1..=T`.
fn coalescing_frames(embed: &DMatrix<f64>, len: usize) -> Result<Vec<DMatrix<f64>>> {
    (1..=len)
        .map(|t| Ok(embed * polar_factor(&coalescing_basis(t as f64 / len as f64))?))
        .collect()
}

/// Coalescing design. For `side == Row` the data are `R_t F_t Cbar_t^T` with
/// `R_t = Rbar_t Lambda_R(t/T)^{1/2}`, so only the row scatter carries the
/// eigenvalue curves; `side == Column` is the mirror image with `Lambda_C`.
/// The signal is rescaled to unit mean squared entry and multiplied by
/// `alpha`, then VAR(1) noise with coefficient `psi` is added.
pub fn gen_coalescing(cfg: &ExperimentConfig, side: LoadingSide, rep: u64) -> Result<Simulated> {
    cfg.validate()?;
    if cfg.dgp != Dgp::Coalescing {
        return Err(Error::invalid("configuration is not a coalescing design"));
    }
    let mut rng = rep_rng(cfg.seed, rep);
    let len = cfg.len;
    let u_r = random_orthonormal(cfg.p, 4, &mut rng)?;
    let u_c = random_orthonormal(cfg.q, 4, &mut rng)?;
    let m = random_orthonormal(4, 4, &mut rng)?;
    let mut rows = coalescing_frames(&u_r, len)?;
    let mut cols = coalescing_frames(&u_c, len)?;
    let lambda_fn = match side {
        LoadingSide::Row => lambda_row,
        LoadingSide::Column => lambda_col,
    };
    let lambda: Vec<[f64; 4]> = (1..=len).map(|t| lambda_fn(t as f64 / len as f64)).collect();
    let scaled = match side {
        LoadingSide::Row => &mut rows,
        LoadingSide::Column => &mut cols,
    };
    for (a, l) in scaled.iter_mut().zip(&lambda) {
        for (j, v) in l.iter().enumerate() {
            a.column_mut(j).scale_mut(v.max(0.0).sqrt());
        }
    }

    let trend = |t: usize| t as f64 / len as f64;
    let mut factors: Vec<DMatrix<f64>> = match cfg.scenario {
        Scenario::S2 => (1..=len).map(|t| &m * trend(t)).collect(),
        Scenario::S0 | Scenario::S1 => {
            let var = gen_var1_with(16, len, FACTOR_AR, &mut rng)?;
            var.into_iter()
                .enumerate()
                .map(|(i, v)| {
                    let f = DMatrix::from_column_slice(4, 4, v.as_slice());
                    if cfg.scenario == Scenario::S1 {
                        f + &m * ((cfg.k as f64).sqrt() * trend(i + 1))
                    } else {
                        f
                    }
                })
                .collect()
        }
    };

    let mean_sq = rows
        .iter()
        .zip(&cols)
        .zip(&factors)
        .map(|((r, c), f)| (r * f * c.transpose()).norm_squared())
        .sum::<f64>()
        / (len * cfg.p * cfg.q) as f64;
    if !(mean_sq > 0.0) {
        return Err(Error::Numerical("coalescing signal is identically zero".into()));
    }
    let gain = (cfg.snr_alpha2 / mean_sq).sqrt();
    for f in factors.iter_mut() {
        f.scale_mut(gain);
    }
    let e = noise(cfg, &mut rng)?;
    assemble(rows, cols, factors, e, lambda)
}

/// Dispatch on `cfg.dgp`; the coalescing design uses the row study.
pub fn generate(cfg: &ExperimentConfig, rep: u64) -> Result<Simulated> {
    match cfg.dgp {
        Dgp::Dgp1 => gen_dgp1(cfg, rep),
        Dgp::Dgp2 => gen_dgp2(cfg, rep),
        Dgp::Coalescing => gen_coalescing(cfg, LoadingSide::Row, rep),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_values() {
        assert!((g_curve(0.5) - 1.0).abs() < 1e-15);
        assert!((h_curve(0.2) - 0.2).abs() < 1e-15);
        assert!((logistic(3.0, 2.0, 3.0) - 0.5).abs() < 1e-15);
        assert!(logistic(50.0, 2.0, 3.0) > 1.0 - 1e-12 && logistic(-50.0, 2.0, 3.0) < 1e-12);
    }

    #[test]
    fn lambda_at_zero() {
        assert_eq!(lambda_row(0.0), [2.0, 1.5, 1.0, 0.0]);
    }

    #[test]
    fn row_curves_cross_at_half() {
        let c = crossing_points(lambda_row);
        assert_eq!(c.len(), 1);
        assert!((c[0].u - 0.5).abs() < 1e-9);
        assert_eq!(c[0].kappa, 3);
    }

    #[test]
    fn column_crossings() {
        let c = crossing_points(lambda_col);
        assert_eq!(c.len(), 2);
        assert!((c[0].u - 0.28).abs() < 0.01 && c[0].kappa == 2);
        assert!((c[1].u - 0.83).abs() < 0.01 && c[1].kappa == 3);
    }

    #[test]
    fn frames_are_orthonormal() {
        let mut rng = rep_rng(3, 0);
        let u = random_orthonormal(10, 4, &mut rng).unwrap();
        for a in coalescing_frames(&u, 50).unwrap() {
            assert!((a.transpose() * &a - DMatrix::<f64>::identity(4, 4)).amax() < 1e-10);
        }
    }

    #[test]
    fn config_validation() {
        let ok = ExperimentConfig::standard(Dgp::Dgp1, 10, 10, 50, 0.1);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.psi = 1.0;
        assert!(bad.validate().is_err());
        let mut bad = ok.clone();
        bad.k = 3;
        assert!(bad.validate().is_err());
        let mut bad = ExperimentConfig::coalescing(10, 10, 50, 0.1, 0.05, Scenario::S0);
        assert!((bad.snr_alpha2 - 19.0).abs() < 1e-12);
        bad.snr_alpha2 = 0.0;
        assert!(bad.validate().is_err());
        assert!(gen_coalescing(&ok, LoadingSide::Row, 0).is_err());
    }

    #[test]
    fn var1_rejects_unit_root() {
        assert!(gen_var1(2, 10, 1.0, 0).is_err());
        assert!(gen_var1(2, 10, -1.2, 0).is_err());
    }
}
