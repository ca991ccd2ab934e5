use super::{ConstrainedFit, FuncEstimate};
use crate::aux::{constraint_values, ConstraintSpec, CriterionEval};
use crate::error::Result;
use crate::linalg::{inverse, min_eigenvalue, sqrt_psd};
use nalgebra::{DMatrix, DVector};

/// Both sides of the first-order expansion linking the constrained and the
/// (surrogate) unconstrained estimator, plus the projected form.
#[derive(Debug, Clone)]
pub struct Lemma1Diagnostic {
    /// `J sqrt(T)(beta_r - beta0) - G(beta0)' sqrt(T) lambda`
    pub lhs: DVector<f64>,
    /// `J sqrt(T)(beta_hat - beta0)`, with the FUNC estimate standing in for the unconstrained one.
    pub rhs: DVector<f64>,
    pub residual_norm: f64,
    /// `|| Y_r - (M_X Y - X (X'X)^{-1} sqrt(T) g~(beta0)) ||` over the binding constraints.
    pub projected_residual: f64,
    /// With `J` and the score taken at `beta0`: `|| J0 sqrt(T)(beta_r - beta0) - G' sqrt(T) lambda - sqrt(T) s(beta0) ||`.
    pub infeasible_residual: Option<f64>,
    /// Smallest eigenvalue of J; negative values mean J was clipped for the square root.
    pub j_min_eigenvalue: f64,
}

pub fn lemma1_decomposition(
    fit: &ConstrainedFit,
    func: &FuncEstimate,
    spec: &ConstraintSpec,
    beta_true: &DVector<f64>,
    truth_eval: Option<&CriterionEval>,
) -> Result<Lemma1Diagnostic> {
    let rt = (fit.t as f64).sqrt();
    let j = -&fit.eval.hessian;
    let cv0 = constraint_values(beta_true, spec, fit.t);
    let g0 = &cv0.jacobian;
    let lhs = &j * (&fit.beta_r - beta_true) * rt - g0.transpose() * &fit.lambda * rt;
    let rhs = &j * (&func.beta_hat - beta_true) * rt;
    let residual_norm = (&lhs - &rhs).norm();

    let j_min = min_eigenvalue(&j);
    let jh = sqrt_psd(&j);
    let y = &jh * (&func.beta_hat - beta_true) * rt;
    let yr = &jh * (&fit.beta_r - beta_true) * rt;
    let projected_residual = if fit.binding.is_empty() {
        (&yr - &y).norm()
    } else {
        let jmh = inverse(&jh, "J^{1/2}")?;
        let k = fit.binding.len();
        let gt = DMatrix::from_fn(k, beta_true.len(), |r, c| g0[(fit.binding[r], c)]);
        let x = &jmh * gt.transpose();
        let xtx_inv = inverse(&(x.transpose() * &x), "X'X")?;
        let px = &x * &xtx_inv * x.transpose();
        let mx = DMatrix::identity(px.nrows(), px.ncols()) - px;
        let g_tilde = DVector::from_iterator(k, fit.binding.iter().map(|&b| cv0.slack[b]));
        let pred = &mx * &y - &x * &xtx_inv * g_tilde * rt;
        (&yr - pred).norm()
    };

    let infeasible_residual = truth_eval.map(|ev| {
        let j0 = -&ev.hessian;
        let l = &j0 * (&fit.beta_r - beta_true) * rt - g0.transpose() * &fit.lambda * rt;
        (l - &ev.score * rt).norm()
    });

    Ok(Lemma1Diagnostic { lhs, rhs, residual_norm, projected_residual, infeasible_residual, j_min_eigenvalue: j_min })
}
