//! Raw varimax rotation by sweeps of pairwise planar rotations.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Clone)]
pub struct VarimaxResult {
    /// `stacked * rotation`
    pub rotated: DMatrix<f64>,
    /// Orthogonal `d x d` rotation.
    pub rotation: DMatrix<f64>,
    pub criterion: f64,
    pub sweeps: usize,
    /// False when `max_iter` sweeps ran without meeting the tolerance.
    pub converged: bool,
}

/// Sum over columns of the variance of the squared entries.
pub fn varimax_criterion(m: &DMatrix<f64>) -> f64 {
    let rows = m.nrows() as f64;
    m.column_iter()
        .map(|c| {
            let mean2 = c.iter().map(|v| v * v).sum::<f64>() / rows;
            let mean4 = c.iter().map(|v| v.powi(4)).sum::<f64>() / rows;
            mean4 - mean2 * mean2
        })
        .sum()
}

/// Optimal planar angle for the column pair `(x, y)`.
fn pair_angle(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        let u = xi * xi - yi * yi;
        let v = 2.0 * xi * yi;
        a += u;
        b += v;
        c += u * u - v * v;
        d += 2.0 * u * v;
    }
    let num = d - 2.0 * a * b / m;
    let den = c - (a * a - b * b) / m;
    0.25 * num.atan2(den)
}

fn rotate_pair(m: &mut DMatrix<f64>, j: usize, l: usize, phi: f64) {
    let (s, c) = phi.sin_cos();
    for i in 0..m.nrows() {
        let x = m[(i, j)];
        let y = m[(i, l)];
        m[(i, j)] = c * x + s * y;
        m[(i, l)] = -s * x + c * y;
    }
}

/// Varimax rotation of a tall matrix. Iterates full sweeps over all column
/// pairs until one sweep improves the criterion by less than `tol`.
pub fn varimax(stacked: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<VarimaxResult> {
    let (rows, d) = stacked.shape();
    if d < 2 {
        return Err(Error::invalid("varimax needs at least two columns"));
    }
    if rows < d {
        return Err(Error::invalid(format!("varimax needs at least {d} rows, got {rows}")));
    }
    let mut rotated = stacked.clone();
    let mut rotation = DMatrix::identity(d, d);
    let mut criterion = varimax_criterion(&rotated);
    let mut sweeps = 0;
    let mut converged = false;
    let mut xs = vec![0.0; rows];
    let mut ys = vec![0.0; rows];
    while sweeps < max_iter {
        sweeps += 1;
        for j in 0..d - 1 {
            for l in j + 1..d {
                xs.iter_mut().zip(rotated.column(j).iter()).for_each(|(a, b)| *a = *b);
                ys.iter_mut().zip(rotated.column(l).iter()).for_each(|(a, b)| *a = *b);
                let phi = pair_angle(&xs, &ys);
                if phi.abs() > 1e-15 {
                    rotate_pair(&mut rotated, j, l, phi);
                    rotate_pair(&mut rotation, j, l, phi);
                }
            }
        }
        let next = varimax_criterion(&rotated);
        let gain = next - criterion;
        criterion = next;
        if gain < tol {
            converged = true;
            break;
        }
    }
    Ok(VarimaxResult {
        rotated,
        rotation,
        criterion,
        sweeps,
        converged,
    })
}
