//! Small dense linear-algebra helpers on top of nalgebra.

use crate::error::{IndiiError, Result};
use nalgebra::{DMatrix, DVector};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

/// Eigenvalues (ascending) and eigenvectors of the symmetrized matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let e = nalgebra::SymmetricEigen::new(symmetrize(m));
    let n = e.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| e.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &e.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let d = DMatrix::from_diagonal(&vals.map(f));
    symmetrize(&(&vecs * d * vecs.transpose()))
}

/// Symmetric square root with negative eigenvalues clipped at zero.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    spectral_map(m, |v| v.max(0.0).sqrt())
}

pub fn inv_sqrt_pd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_pd(m, "inverse square root")?;
    Ok(spectral_map(m, |v| 1.0 / v.sqrt()))
}

/// Clip eigenvalues from below, returning the repaired matrix and whether clipping happened.
pub fn clip_eigen_below(m: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, bool) {
    let (vals, _) = sym_eigen(m);
    if vals.iter().all(|&v| v >= floor) {
        return (symmetrize(m), false);
    }
    (spectral_map(m, |v| v.max(floor)), true)
}

pub fn require_pd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(IndiiError::Dimension(format!("{what}: matrix is not square")));
    }
    if asymmetry(m) > 1e-8 * (1.0 + m.amax()) {
        return Err(IndiiError::NotPositiveDefinite(format!("{what}: not symmetric")));
    }
    let lo = min_eigenvalue(m);
    if !(lo > 0.0) {
        return Err(IndiiError::NotPositiveDefinite(format!(
            "{what}: minimum eigenvalue {lo:e}"
        )));
    }
    Ok(())
}

/// `a ⪯ b` in the positive semidefinite order, with slack on the smallest eigenvalue of `b - a`.
pub fn psd_leq(a: &DMatrix<f64>, b: &DMatrix<f64>, slack: f64) -> bool {
    min_eigenvalue(&(b - a)) >= -slack
}

pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    m.clone()
        .lu()
        .try_inverse()
        .filter(|inv| inv.iter().all(|v| v.is_finite()))
        .ok_or_else(|| IndiiError::SingularMatrix(what.to_string()))
}

pub fn inverse_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    require_pd(m, what)?;
    let c = nalgebra::Cholesky::new(symmetrize(m))
        .ok_or_else(|| IndiiError::NotPositiveDefinite(what.to_string()))?;
    Ok(symmetrize(&c.inverse()))
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    if s.is_empty() {
        return 1.0;
    }
    let hi = s.max();
    let lo = s.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Numerical rank with the relative threshold `tol * sigma_max`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let s = singular_values(m);
    if s.is_empty() {
        return 0;
    }
    let hi = s.max();
    s.iter().filter(|&&v| v > tol * hi).count()
}

/// Columns that are (numerically) linear combinations of earlier columns.
pub fn dependent_columns(m: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let mut kept: Vec<DVector<f64>> = Vec::new();
    let mut out = Vec::new();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    for j in 0..m.ncols() {
        let mut v = m.column(j).into_owned();
        for q in &kept {
            let c = q.dot(&v);
            v -= q * c;
        }
        let n = v.norm();
        if n <= tol * scale * (m.nrows() as f64).sqrt() {
            out.push(j);
        } else {
            kept.push(v / n);
        }
    }
    out
}

/// Diagonal scaling `D = diag(1/sqrt|m_ii|)` used to balance badly scaled Hessians.
pub fn diag_scaling(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        m.nrows(),
        (0..m.nrows()).map(|i| {
            let a = m[(i, i)].abs();
            if a > 1e-300 && a.is_finite() {
                1.0 / a.sqrt()
            } else {
                1.0
            }
        }),
    )
}

pub fn scale_sym(m: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * d[j])
}

/// Condition number after symmetric diagonal balancing.
pub fn scaled_condition_number(m: &DMatrix<f64>) -> f64 {
    condition_number(&scale_sym(m, &diag_scaling(m)))
}

/// Orthogonal projector onto the column span of `x` (assumed full column rank).
pub fn projector(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let xtx = x.transpose() * x;
    let inv = inverse(&xtx, "X'X in projector")?;
    Ok(symmetrize(&(x * inv * x.transpose())))
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_roundtrip() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = sqrt_psd(&m);
        assert!((&r * &r - &m).amax() < 1e-12);
        let ir = inv_sqrt_pd(&m).unwrap();
        assert!((&ir * &m * &ir - DMatrix::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn dependent_column_detection() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 0.0]);
        assert_eq!(dependent_columns(&m, 1e-10), vec![1]);
        assert_eq!(rank(&m, 1e-10), 2);
    }

    #[test]
    fn psd_order() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::identity(2, 2) * 2.0;
        assert!(psd_leq(&a, &b, 0.0));
        assert!(!psd_leq(&b, &a, 1e-8));
    }
}
