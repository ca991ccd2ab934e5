use crate::error::{IndiiError, Result};
use crate::linalg::{dependent_columns, inv_sqrt_pd, inverse, inverse_pd, min_eigenvalue, projector, rank, sqrt_psd, symmetrize};
use nalgebra::DMatrix;

/// A `d_beta x q` selection matrix of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionMatrix(pub DMatrix<f64>);

impl SelectionMatrix {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() > a.ncols() {
            return Err(IndiiError::Dimension(format!("A is {}x{}, needs d_beta <= q", a.nrows(), a.ncols())));
        }
        let r = rank(&a, 1e-10);
        if r < a.nrows() {
            return Err(IndiiError::RankDeficient(dependent_columns(&a.transpose(), 1e-10)));
        }
        Ok(Self(a))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn d_beta(&self) -> usize {
        self.0.nrows()
    }

    pub fn q(&self) -> usize {
        self.0.ncols()
    }
}

fn a_gamma_inv(a: &SelectionMatrix, gamma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.q() != gamma.nrows() || a.d_beta() != gamma.ncols() {
        return Err(IndiiError::Dimension("A and Gamma do not conform".into()));
    }
    inverse(&(&a.0 * gamma), "A Gamma")
}

/// `Gamma' V^{-1}`.
pub fn naive_optimal_a(gamma: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<SelectionMatrix> {
    let vinv = inverse_pd(v, "V")?;
    SelectionMatrix::new(gamma.transpose() * vinv)
}

/// `(A Gamma)^{-1} A V A' (Gamma' A')^{-1}`.
pub fn avar_beta(a: &SelectionMatrix, gamma: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = a_gamma_inv(a, gamma)?;
    Ok(symmetrize(&(&inv * &a.0 * v * a.0.transpose() * inv.transpose())))
}

/// `-(A Gamma)^{-1} A Gamma_theta`.
pub fn binding_slope(a: &SelectionMatrix, gamma: &DMatrix<f64>, gamma_theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = a_gamma_inv(a, gamma)?;
    Ok(-(inv * &a.0 * gamma_theta))
}

/// `Gamma_theta' A' (A V A')^{-1} A Gamma_theta`.
pub fn ii_information(a: &SelectionMatrix, gamma_theta: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ava = symmetrize(&(&a.0 * v * a.0.transpose()));
    let agt = &a.0 * gamma_theta;
    Ok(symmetrize(&(agt.transpose() * inverse_pd(&ava, "A V A'")? * agt)))
}

/// The same information written as `(V^{-1/2} Gamma_theta)' P_X (V^{-1/2} Gamma_theta)`, `X = V^{1/2} A'`.
/// Returns the information and `P_X`.
pub fn ii_information_projection(
    a: &SelectionMatrix,
    gamma_theta: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let x = sqrt_psd(v) * a.0.transpose();
    let p = projector(&x)?;
    let z = inv_sqrt_pd(v)? * gamma_theta;
    Ok((symmetrize(&(z.transpose() * &p * z)), p))
}

/// Asymptotic variance of the Wald I-I estimator of theta built on `beta_hat(A)` with `W*(A)`.
pub fn ii_avar_theta(a: &SelectionMatrix, gamma_theta: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let info = ii_information(a, gamma_theta, v)?;
    if info.nrows() == 0 {
        return Ok(info);
    }
    // relative to the largest attainable information Gamma_theta' V^{-1} Gamma_theta
    let best = gamma_theta.transpose() * inverse_pd(v, "V")? * gamma_theta;
    if min_eigenvalue(&info) <= 1e-10 * best.amax() {
        return Err(IndiiError::NotIdentified(
            "A annihilates directions of Gamma_theta: information for theta is singular".into(),
        ));
    }
    Ok(symmetrize(&inverse_pd(&info, "I-I information")?))
}

/// `[Gamma_theta' V^{-1}; C']`. `C` must have full column rank with columns outside span(V^{-1} Gamma_theta).
pub fn optimal_a_for_theta(gamma_theta: &DMatrix<f64>, v: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<SelectionMatrix> {
    let q = v.nrows();
    if gamma_theta.nrows() != q || c.nrows() != q {
        return Err(IndiiError::Dimension("Gamma_theta, V and C must have q rows".into()));
    }
    let vg = inverse_pd(v, "V")? * gamma_theta;
    let dt = vg.ncols();
    let mut stacked = DMatrix::zeros(q, dt + c.ncols());
    stacked.columns_mut(0, dt).copy_from(&vg);
    stacked.columns_mut(dt, c.ncols()).copy_from(c);
    let dep = dependent_columns(&stacked, 1e-10);
    if !dep.is_empty() {
        let bad: Vec<usize> = dep.iter().filter(|&&j| j >= dt).map(|j| j - dt).collect();
        return Err(IndiiError::Inadmissible(format!(
            "columns {bad:?} of C are in the span of V^-1 Gamma_theta and the other columns"
        )));
    }
    SelectionMatrix::new(stacked.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_counterexample() {
        let v = DMatrix::<f64>::identity(3, 3);
        let gt = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let gamma = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let naive = naive_optimal_a(&gamma, &v).unwrap();
        assert!(matches!(ii_avar_theta(&naive, &gt, &v), Err(IndiiError::NotIdentified(_))));
        let c = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 1.0]);
        let a = optimal_a_for_theta(&gt, &v, &c).unwrap();
        assert!((ii_avar_theta(&a, &gt, &v).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inadmissible_c() {
        let v = DMatrix::<f64>::identity(3, 3);
        let gt = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let c = DMatrix::from_column_slice(3, 1, &[2.0, 0.0, 0.0]);
        assert!(matches!(optimal_a_for_theta(&gt, &v, &c), Err(IndiiError::Inadmissible(_))));
    }
}
