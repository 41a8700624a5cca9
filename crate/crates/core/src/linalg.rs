//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Ratio of largest to smallest absolute eigenvalue of a symmetric matrix.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(a.clone());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for v in eig.eigenvalues.iter() {
        lo = lo.min(v.abs());
        hi = hi.max(v.abs());
    }
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a symmetric positive-definite matrix, or a
/// [`Error::Singular`] carrying a condition estimate.
pub fn cholesky(a: &DMatrix<f64>, context: &str) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    a.clone().cholesky().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: condition_estimate(a),
    })
}

/// Replaces negative eigenvalues by zero. Returns the projected matrix and
/// whether anything changed.
pub fn project_psd(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|&v| v >= 0.0) {
        return (sym, false);
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&clamped) * q.transpose();
    ((&out + out.transpose()) * 0.5, true)
}

/// Index of the first column that is numerically a linear combination of the
/// preceding ones (modified Gram-Schmidt, relative tolerance).
pub fn first_dependent_column(x: &DMatrix<f64>) -> Option<usize> {
    let tol = 1e-10;
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j).clone_owned();
        let norm0 = col.norm();
        if norm0 == 0.0 {
            return Some(j);
        }
        let mut v = col;
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        let norm = v.norm();
        if norm <= tol * norm0 {
            return Some(j);
        }
        basis.push(v / norm);
    }
    None
}

/// Submatrix with the given rows and columns.
pub fn select(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}
