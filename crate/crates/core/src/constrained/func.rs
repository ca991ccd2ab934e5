use super::ConstrainedFit;
use crate::aux::CriterionEval;
use crate::error::{IndiiError, Result};
use crate::linalg::{diag_scaling, scale_sym, scaled_condition_number};
use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Hessians whose balanced condition number exceeds this are ridged before inversion.
pub const COND_LIMIT: f64 = 1e12;
/// Ridge size relative to the Hessian diagonal.
pub const RIDGE_REL: f64 = 1e-8;

/// One Newton step from the constrained estimator.
#[derive(Debug, Clone)]
pub struct FuncEstimate {
    pub beta_hat: DVector<f64>,
    /// `beta_hat - beta_r`.
    pub step: DVector<f64>,
    pub beta_r: DVector<f64>,
    /// The Hessian actually inverted (ridged if `ridge > 0`).
    pub hessian_used: DMatrix<f64>,
    pub ridge: f64,
}

/// `beta_r - H^{-1} s` for an arbitrary evaluation point.
pub fn func_from_eval(beta_r: &DVector<f64>, eval: &CriterionEval) -> Result<FuncEstimate> {
    let h = &eval.hessian;
    let d = diag_scaling(h);
    let mut hs = scale_sym(h, &d);
    let cond = scaled_condition_number(h);
    let mut ridge = 0.0;
    if !(cond < COND_LIMIT) {
        if !cond.is_finite() && hs.iter().any(|v| !v.is_finite()) {
            return Err(IndiiError::SingularMatrix("Hessian has non-finite entries".into()));
        }
        ridge = RIDGE_REL;
        for i in 0..hs.nrows() {
            hs[(i, i)] -= ridge;
        }
        log::warn!("Hessian condition number {cond:e}; ridge of {ridge:e} (relative to the diagonal) applied");
    }
    let ds = eval.score.component_mul(&d);
    let z = hs
        .clone()
        .lu()
        .solve(&ds)
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .ok_or_else(|| IndiiError::SingularMatrix("Hessian at the constrained estimate".into()))?;
    let step = -z.component_mul(&d);
    let dinv = d.map(|v| 1.0 / v);
    let hessian_used = scale_sym(&hs, &dinv);
    Ok(FuncEstimate { beta_hat: beta_r + &step, step, beta_r: beta_r.clone(), hessian_used, ridge })
}

pub fn func_estimator(fit: &ConstrainedFit) -> Result<FuncEstimate> {
    func_from_eval(&fit.beta_r, &fit.eval)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ScoreTest {
    pub xi: f64,
    pub df: usize,
    pub p_value: f64,
}

/// `xi = T (beta_hat - beta_r)' (-H) (beta_hat - beta_r)`, asymptotically chi-square with q d.o.f.
pub fn score_test(_fit: &ConstrainedFit, func: &FuncEstimate, t: usize, q: usize) -> Result<ScoreTest> {
    if q == 0 {
        return Err(IndiiError::InvalidParameter("score test needs at least one equality constraint".into()));
    }
    let step = &func.step;
    let xi = -(t as f64) * step.dot(&(&func.hessian_used * step));
    if xi < -1e-8 {
        return Err(IndiiError::NonConcavity(xi));
    }
    let xi = xi.max(0.0);
    let chi = ChiSquared::new(q as f64).map_err(|e| IndiiError::InvalidParameter(e.to_string()))?;
    Ok(ScoreTest { xi, df: q, p_value: chi.sf(xi) })
}
