//! Small dense linear-algebra helpers on complex matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::C64;

/// `e^{jθ}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    let (s, c) = theta.sin_cos();
    C64::new(c, s)
}

/// `Σ conj(a_i) b_i`.
#[inline]
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

pub fn normalize(a: &mut [C64]) {
    let n = norm_sqr(a).sqrt();
    if n > 0.0 {
        a.iter_mut().for_each(|x| *x /= n);
    }
}

/// Least-squares coefficients `X = argmin ‖Y - A X‖_F` via the normal equations.
///
/// Returns `None` when `AᴴA` is numerically singular.
pub fn least_squares(a: &DMatrix<C64>, y: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    if a.ncols() == 0 {
        return Some(DMatrix::zeros(0, y.ncols()));
    }
    let gram = a.ad_mul(a);
    let rhs = a.ad_mul(y);
    solve_hermitian(&gram, &rhs)
}

/// Solves `G X = B` for Hermitian positive definite `G`.
pub fn solve_hermitian(gram: &DMatrix<C64>, rhs: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    let scale = (0..gram.nrows()).map(|i| gram[(i, i)].re).fold(0.0, f64::max);
    let chol = gram.clone().cholesky()?;
    let min_pivot = (0..gram.nrows()).map(|i| chol.l_dirty()[(i, i)].re).fold(f64::INFINITY, f64::min);
    if !(min_pivot * min_pivot > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        return None;
    }
    Some(chol.solve(rhs))
}

/// Energy of `Y` captured by the column span of `A`, `‖P_A Y‖²_F`.
pub fn captured_energy(a: &DMatrix<C64>, y: &DMatrix<C64>) -> Option<f64> {
    let x = least_squares(a, y)?;
    let proj = a * x;
    Some(proj.norm_squared())
}

/// Hermitian eigendecomposition with eigenpairs sorted by descending eigenvalue.
pub fn hermitian_eigen_desc(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Principal components of a snapshot matrix.
///
/// Returns `(U Σ, σ²)` where `Y = U Σ Vᴴ` is the thin SVD of `y` truncated to
/// `rank` components; the eigenvalues `σ²` are all `min(N, T)` of them.
/// Because `V` is orthonormal, `‖aᴴ (UΣ)‖² = ‖aᴴ Y‖²` when nothing is
/// truncated, so multiple-measurement solvers can run on the reduced matrix.
pub fn principal_snapshots(y: &DMatrix<C64>, rank: usize) -> (DMatrix<C64>, Vec<f64>) {
    if y.ncols() <= y.nrows() {
        let gram = y.ad_mul(y);
        let (values, vectors) = hermitian_eigen_desc(&gram);
        let keep = rank.min(values.len());
        let v = vectors.columns(0, keep).into_owned();
        (y * v, values)
    } else {
        let outer = y * y.adjoint();
        let (values, vectors) = hermitian_eigen_desc(&outer);
        let keep = rank.min(values.len());
        let mut us = vectors.columns(0, keep).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= C64::new(values[j].max(0.0).sqrt(), 0.0);
        }
        (us, values)
    }
}

/// Orthonormal basis of the `rank` dominant left singular vectors of `y`.
pub fn signal_subspace(y: &DMatrix<C64>, rank: usize) -> DMatrix<C64> {
    let (reduced, values) = principal_snapshots(y, rank);
    let mut basis = reduced;
    for (j, mut col) in basis.column_iter_mut().enumerate() {
        let s = values[j].max(0.0).sqrt();
        if s > 0.0 {
            col /= C64::new(s, 0.0);
        }
    }
    basis
}

pub fn column(m: &DMatrix<C64>, j: usize) -> DVector<C64> {
    m.column(j).into_owned()
}
