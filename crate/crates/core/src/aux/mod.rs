//! Auxiliary pseudo-log-likelihood criteria with analytic score and Hessian.
//!
//! All criteria are mean-scaled: value, score and Hessian are sample means.

mod constraints;
mod garch;
mod probit;
mod simple;
pub mod special;

pub use constraints::{
    constraint_values, default_eta_gap, default_phi_bound, garch_spec, garch_t_spec, zero_last_spec, BoundRule,
    Constraint, ConstraintFile, ConstraintFn, ConstraintKind, ConstraintSpec, ConstraintValues, LinearEntry,
};
pub use garch::{
    garch_filter, garch_gaussian_eval, garch_student_eval, GarchCriterion, GarchDensity, STUDENT_GAUSSIAN_SWITCH,
};
pub use probit::{generalized_residuals, probit_constrained_eval, Beta2Curvature, ProbitCriterion, ProbitData};
pub use simple::{GaussianLocation, QuadraticCriterion};

use crate::error::{IndiiError, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionEval {
    pub value: f64,
    pub score: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl CriterionEval {
    pub fn zeros(d: usize) -> Self {
        Self { value: 0.0, score: DVector::zeros(d), hessian: DMatrix::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.score.len()
    }

    fn add_scaled(&mut self, other: &CriterionEval, w: f64) {
        self.value += w * other.value;
        self.score += &other.score * w;
        self.hessian += &other.hessian * w;
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.score.iter().all(|v| v.is_finite()) && self.hessian.iter().all(|v| v.is_finite())
    }
}

/// Average of evaluations (the pooled H-path criterion).
pub fn average_evals(evals: &[CriterionEval]) -> Result<CriterionEval> {
    let first = evals.first().ok_or_else(|| IndiiError::Dimension("no evaluations to average".into()))?;
    let mut acc = CriterionEval::zeros(first.dim());
    let w = 1.0 / evals.len() as f64;
    for e in evals {
        acc.add_scaled(e, w);
    }
    Ok(acc)
}

/// An auxiliary criterion `Q_T(beta)` together with its constraint set.
pub trait Criterion: Sync {
    type Data: Sync;

    fn name(&self) -> String;
    fn dim(&self) -> usize;
    fn param_names(&self) -> Vec<String>;
    fn constraints(&self) -> &ConstraintSpec;
    fn sample_size(&self, data: &Self::Data) -> usize;
    fn evaluate(&self, beta: &DVector<f64>, data: &Self::Data) -> Result<CriterionEval>;

    /// Rows are per-observation score contributions; their mean is the score.
    fn score_contributions(&self, beta: &DVector<f64>, data: &Self::Data) -> Result<DMatrix<f64>>;

    /// A strictly feasible starting point.
    fn default_start(&self, data: &Self::Data) -> DVector<f64>;

    fn value(&self, beta: &DVector<f64>, data: &Self::Data) -> Result<f64> {
        Ok(self.evaluate(beta, data)?.value)
    }

    /// Mean of the criterion over several samples of equal length.
    fn evaluate_pooled(&self, beta: &DVector<f64>, data: &[Self::Data]) -> Result<CriterionEval> {
        let evals = data.iter().map(|d| self.evaluate(beta, d)).collect::<Result<Vec<_>>>()?;
        average_evals(&evals)
    }
}

/// The pooled criterion over H simulated samples, itself a criterion.
pub struct Pooled<'a, C: Criterion> {
    pub inner: &'a C,
}

impl<'a, C: Criterion> Criterion for Pooled<'a, C>
where
    C::Data: Sync,
{
    type Data = Vec<C::Data>;

    fn name(&self) -> String {
        format!("pooled {}", self.inner.name())
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn param_names(&self) -> Vec<String> {
        self.inner.param_names()
    }
    fn constraints(&self) -> &ConstraintSpec {
        self.inner.constraints()
    }
    /// Bounds use the per-path length, so simulated refits face the same constraint set as the observed fit.
    fn sample_size(&self, data: &Self::Data) -> usize {
        data.first().map(|d| self.inner.sample_size(d)).unwrap_or(0)
    }
    fn evaluate(&self, beta: &DVector<f64>, data: &Self::Data) -> Result<CriterionEval> {
        self.inner.evaluate_pooled(beta, data)
    }
    fn score_contributions(&self, beta: &DVector<f64>, data: &Self::Data) -> Result<DMatrix<f64>> {
        let parts = data.iter().map(|d| self.inner.score_contributions(beta, d)).collect::<Result<Vec<_>>>()?;
        let rows: usize = parts.iter().map(|p| p.nrows()).sum();
        let mut out = DMatrix::zeros(rows, self.dim());
        let mut r = 0;
        for p in parts {
            out.rows_mut(r, p.nrows()).copy_from(&p);
            r += p.nrows();
        }
        Ok(out)
    }
    fn default_start(&self, data: &Self::Data) -> DVector<f64> {
        self.inner.default_start(&data[0])
    }
}
