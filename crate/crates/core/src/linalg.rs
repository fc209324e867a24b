//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest absolute entry of `m - m^T`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `acc += alpha * m` for equally shaped matrices.
pub fn add_scaled(acc: &mut DMatrix<f64>, alpha: f64, m: &DMatrix<f64>) {
    debug_assert_eq!(acc.shape(), m.shape());
    for (a, b) in acc.as_mut_slice().iter_mut().zip(m.as_slice()) {
        *a += alpha * b;
    }
}

/// Replace `m` by `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
/// Column `j` of the returned matrix is the unit eigenvector of value `j`.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Flip the sign of every column so that its entry of largest magnitude is
/// positive (ties resolved towards the lowest row index).
pub fn canonical_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass, processing
/// columns left to right. Returns a matrix with orthonormal columns.
pub fn gram_schmidt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = m.shape();
    if d > n {
        return Err(Error::RankDeficient);
    }
    let mut q = m.clone();
    for j in 0..d {
        let scale = m.column(j).norm().max(f64::MIN_POSITIVE);
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if !(norm > 1e-12 * scale) {
            return Err(Error::RankDeficient);
        }
        q.column_mut(j).unscale_mut(norm);
    }
    Ok(q)
}

/// Orthogonal polar factor `Q (Q^T Q)^{-1/2}` of a square or tall matrix,
/// computed as `U V^T` from the thin SVD.
pub fn polar_factor(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = q.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    Ok(u * v_t)
}

/// `m^{-1/2}` for symmetric positive definite `m`, eigenvalues floored at `floor`.
pub fn inv_sqrt_sym(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen_desc(m);
    let scaled = DVector::from_iterator(vals.len(), vals.iter().map(|&v| v.max(floor).powf(-0.5)));
    &vecs * DMatrix::from_diagonal(&scaled) * vecs.transpose()
}

/// Orthogonal projector onto the column space of `a`, `A (A^T A)^{-1} A^T`,
/// with the Gram matrix inverted through a Cholesky solve.
pub fn column_projector(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = a.transpose() * a;
    let scale = gram.diagonal().max().max(f64::MIN_POSITIVE);
    let chol = gram.clone().cholesky().ok_or(Error::RankDeficient)?;
    // reject numerically singular Gram matrices
    let min_pivot = chol.l_dirty().diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min_pivot * min_pivot < 1e-13 * scale {
        return Err(Error::RankDeficient);
    }
    let at = a.transpose();
    let solved = chol.solve(&at);
    Ok(a * solved)
}
