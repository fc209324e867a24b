//! Independent reference implementations shared by the integration tests.
//! None of these call into the library's linear algebra.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let a = gaussian(n, n, rng);
    (&a + a.transpose()) * 0.5
}

/// Cyclic Jacobi eigenvalue iteration. Returns eigenvalues in descending
/// order and the matching unit eigenvectors as columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)]).collect()).collect();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let vals = order.iter().map(|&i| a[i][i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[r][order[c]]);
    (vals, vecs)
}

/// `sum_s w_s Y_s Y_s^T / (pqT)` (row) or with `Y_s^T Y_s` (column), entry by entry.
pub fn scatter_loop(data: &[DMatrix<f64>], weights: &[(usize, f64)], row_side: bool) -> DMatrix<f64> {
    let (p, q) = data[0].shape();
    let len = data.len();
    let n = if row_side { p } else { q };
    let inner = if row_side { q } else { p };
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for &(s, w) in weights {
                let y = &data[s - 1];
                let mut dot = 0.0;
                for l in 0..inner {
                    dot += if row_side { y[(i, l)] * y[(j, l)] } else { y[(l, i)] * y[(l, j)] };
                }
                acc += w * dot;
            }
            out[(i, j)] = acc / (p * q * len) as f64;
        }
    }
    out
}

/// `R^T Y C / (pq)` by explicit summation.
pub fn factors_loop(r: &DMatrix<f64>, y: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let (p, q) = y.shape();
    DMatrix::from_fn(r.ncols(), c.ncols(), |a, b| {
        let mut acc = 0.0;
        for i in 0..p {
            for j in 0..q {
                acc += r[(i, a)] * y[(i, j)] * c[(j, b)];
            }
        }
        acc / (p * q) as f64
    })
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..2 * n).map(|j| if j < n { m[(i, j)] } else if j - n == i { 1.0 } else { 0.0 }).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, pivot);
        let d = a[col][col];
        for v in a[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                let pivot_row = a[col].clone();
                for (v, pv) in a[row].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    DMatrix::from_fn(n, n, |i, j| a[i][n + j])
}

/// `A (A^T A)^{-1} A^T` with an explicit inverse.
pub fn projector_literal(a: &DMatrix<f64>) -> DMatrix<f64> {
    a * gauss_jordan_inverse(&(a.transpose() * a)) * a.transpose()
}

/// Varimax criterion computed directly from its definition.
pub fn varimax_objective(m: &DMatrix<f64>) -> f64 {
    let rows = m.nrows() as f64;
    let mut total = 0.0;
    for c in 0..m.ncols() {
        let sq: Vec<f64> = (0..m.nrows()).map(|i| m[(i, c)].powi(2)).collect();
        let mean = sq.iter().sum::<f64>() / rows;
        total += sq.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows;
    }
    total
}

/// Largest column-wise deviation between `a` and `b`, allowing each column
/// of `b` to have either sign.
pub fn max_dev_up_to_sign(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .zip(b.column_iter())
        .map(|(x, y)| (x - y).amax().min((x + y).amax()))
        .fold(0.0, f64::max)
}
