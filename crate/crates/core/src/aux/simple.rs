use super::{ConstraintSpec, Criterion, CriterionEval};
use crate::error::{IndiiError, Result};
use crate::sim::TimeSeries;
use nalgebra::{DMatrix, DVector};

/// `Q(beta) = -1/2 (beta - mu)' P (beta - mu)`, with the data being the centre `mu`.
#[derive(Debug, Clone)]
pub struct QuadraticCriterion {
    pub p: DMatrix<f64>,
    pub spec: ConstraintSpec,
    /// Nominal sample size used for drifting bounds.
    pub t: usize,
}

impl QuadraticCriterion {
    pub fn new(p: DMatrix<f64>, spec: ConstraintSpec) -> Self {
        Self { p, spec, t: 1 }
    }
}

impl Criterion for QuadraticCriterion {
    type Data = DVector<f64>;

    fn name(&self) -> String {
        "quadratic".into()
    }
    fn dim(&self) -> usize {
        self.p.nrows()
    }
    fn param_names(&self) -> Vec<String> {
        (1..=self.dim()).map(|i| format!("b{i}")).collect()
    }
    fn constraints(&self) -> &ConstraintSpec {
        &self.spec
    }
    fn sample_size(&self, _data: &DVector<f64>) -> usize {
        self.t
    }
    fn evaluate(&self, beta: &DVector<f64>, mu: &DVector<f64>) -> Result<CriterionEval> {
        if beta.len() != self.dim() || mu.len() != self.dim() {
            return Err(IndiiError::Dimension("quadratic criterion dimension".into()));
        }
        let r = beta - mu;
        let pr = &self.p * &r;
        Ok(CriterionEval { value: -0.5 * r.dot(&pr), score: -pr, hessian: -self.p.clone() })
    }
    fn score_contributions(&self, beta: &DVector<f64>, mu: &DVector<f64>) -> Result<DMatrix<f64>> {
        let s = self.evaluate(beta, mu)?.score;
        Ok(DMatrix::from_row_slice(1, s.len(), s.as_slice()))
    }
    fn default_start(&self, _mu: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(self.dim())
    }
}

/// `Q(beta) = -(1/2T) sum (y_t - beta)^2`.
#[derive(Debug, Clone, Default)]
pub struct GaussianLocation {
    pub spec: ConstraintSpec,
}

impl Criterion for GaussianLocation {
    type Data = TimeSeries;

    fn name(&self) -> String {
        "gaussian-location".into()
    }
    fn dim(&self) -> usize {
        1
    }
    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }
    fn constraints(&self) -> &ConstraintSpec {
        &self.spec
    }
    fn sample_size(&self, data: &TimeSeries) -> usize {
        data.len()
    }
    fn evaluate(&self, beta: &DVector<f64>, data: &TimeSeries) -> Result<CriterionEval> {
        let n = data.len() as f64;
        let b = beta[0];
        let v = -data.values.iter().map(|y| (y - b) * (y - b)).sum::<f64>() / (2.0 * n);
        let s = data.values.iter().map(|y| y - b).sum::<f64>() / n;
        Ok(CriterionEval { value: v, score: DVector::from_element(1, s), hessian: DMatrix::from_element(1, 1, -1.0) })
    }
    fn score_contributions(&self, beta: &DVector<f64>, data: &TimeSeries) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_iterator(data.len(), 1, data.values.iter().map(|y| y - beta[0])))
    }
    fn default_start(&self, _data: &TimeSeries) -> DVector<f64> {
        DVector::zeros(1)
    }
}
