//! Dense linear-algebra helpers for small matrices.
//!
//! Everything here operates on `nalgebra::DMatrix<f64>` and is sized for
//! the regime this crate targets (state dimensions below ten, data
//! windows of a few dozen samples), so plain SVD/eigen factorizations are
//! used throughout.

use nalgebra::DMatrix;

/// Numeric rank via SVD with threshold `max(rows, cols) * eps * sigma_max`.
pub fn numeric_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let sigma_max = sv.iter().cloned().fold(0.0_f64, f64::max);
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max)
}

/// Moore–Penrose pseudoinverse with the same singular-value cutoff as
/// [`numeric_rank`].
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max;
    svd.pseudo_inverse(tol)
        .expect("pseudo_inverse: nonnegative tolerance")
}

/// `(M + M^T) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "symmetrize needs a square matrix");
    (m + m.transpose()) * 0.5
}

/// Largest eigenvalue of a symmetric matrix.
pub fn eig_max_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).1
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn eig_min_sym(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).0
}

/// (smallest, largest) eigenvalue of a symmetric matrix.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    assert!(m.is_square(), "eigenvalues need a square matrix");
    assert!(m.nrows() > 0, "eigenvalues need a nonempty matrix");
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// True when every entry is finite.
pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Solve `M x = rhs` for symmetric positive definite `M`, falling back to
/// LU when the Cholesky factorization fails marginally.
pub fn solve_spd(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

/// Symmetric square root of a PSD matrix; eigenvalues below zero (from
/// round-off) are clamped.
pub fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let se = symmetrize(m).symmetric_eigen();
    let roots = se.eigenvalues.map(|l| l.max(0.0).sqrt());
    &se.eigenvectors * DMatrix::from_diagonal(&roots) * se.eigenvectors.transpose()
}
