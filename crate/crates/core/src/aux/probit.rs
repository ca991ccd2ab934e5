use super::special::{mills, norm_cdf};
use super::{zero_last_spec, ConstraintSpec, Criterion, CriterionEval};
use crate::error::{IndiiError, Result};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

const INDEX_CAP: f64 = 37.0;

/// Binary outcomes with covariates (shared between simulated paths).
#[derive(Debug, Clone)]
pub struct ProbitData {
    pub y: Vec<u8>,
    pub x: Arc<DMatrix<f64>>,
}

impl ProbitData {
    pub fn new(y: Vec<u8>, x: Arc<DMatrix<f64>>) -> Result<Self> {
        if y.len() != x.nrows() {
            return Err(IndiiError::Dimension(format!("{} outcomes vs {} covariate rows", y.len(), x.nrows())));
        }
        if y.iter().any(|&v| v > 1) {
            return Err(IndiiError::InvalidParameter("outcomes must be 0/1".into()));
        }
        Ok(Self { y, x })
    }
}

/// Second derivative of the dynamic-probit log likelihood in beta2 at beta2 = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Beta2Curvature {
    /// Exact second derivative of the bivariate-normal likelihood (default).
    #[default]
    Exact,
    /// `-sum u_{t-1}^2 / T`.
    Lagged,
}

/// Per-period quantities for one outcome value at index `m`.
#[derive(Debug, Clone, Copy)]
struct Cell {
    logp: f64,
    u: f64,
    du: f64,
}

#[inline]
fn cell(y: u8, m: f64) -> Cell {
    if y == 1 {
        let l = mills(m);
        Cell { logp: norm_cdf(m).ln(), u: l, du: -l * (m + l) }
    } else {
        let l = mills(-m);
        Cell { logp: norm_cdf(-m).ln(), u: -l, du: -l * (l - m) }
    }
}

fn capped_index(x: &DMatrix<f64>, beta1: &[f64]) -> Result<DVector<f64>> {
    if x.ncols() != beta1.len() {
        return Err(IndiiError::Dimension(format!("x has {} columns, beta1 has {}", x.ncols(), beta1.len())));
    }
    if beta1.iter().any(|v| !v.is_finite()) {
        return Err(IndiiError::Domain("non-finite beta1".into()));
    }
    Ok((x * DVector::from_column_slice(beta1)).map(|m| m.clamp(-INDEX_CAP, INDEX_CAP)))
}

/// Generalized residuals `u_t = phi(m)(y - Phi(m)) / (Phi(m)(1 - Phi(m)))`, `m = x_t' beta1`.
pub fn generalized_residuals(beta1: &[f64], y: &[u8], x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = capped_index(x, beta1)?;
    Ok(y.iter().zip(m.iter()).map(|(&yt, &mt)| cell(yt, mt).u).collect())
}

fn eval_cells(cells: &[Cell], m: &DVector<f64>, x: &DMatrix<f64>, curv: Beta2Curvature) -> CriterionEval {
    let n = cells.len();
    let d1 = x.ncols();
    let d = d1 + 1;
    let mut e = CriterionEval::zeros(d);
    let mut s22 = 0.0;
    let mut cross = DVector::zeros(d1);
    for t in 0..n {
        let c = cells[t];
        e.value += c.logp;
        let xt = x.row(t);
        for i in 0..d1 {
            e.score[i] += c.u * xt[i];
            for j in 0..=i {
                e.hessian[(i, j)] += c.du * xt[i] * xt[j];
            }
        }
        if t >= 1 {
            let p = cells[t - 1];
            e.score[d1] += p.u * c.u;
            let xp = x.row(t - 1);
            for i in 0..d1 {
                cross[i] += p.du * xp[i] * c.u + p.u * c.du * xt[i];
            }
        }
    }
    match curv {
        Beta2Curvature::Lagged => {
            s22 = -cells[..n.saturating_sub(1)].iter().map(|c| c.u * c.u).sum::<f64>();
        }
        Beta2Curvature::Exact => {
            for t in 1..n {
                let (p, c) = (cells[t - 1], cells[t]);
                s22 += m[t - 1] * m[t] * p.u * c.u - p.u * p.u * c.u * c.u;
            }
            for t in 1..n.saturating_sub(1) {
                s22 += 2.0 * cells[t - 1].u * cells[t].du * cells[t + 1].u;
            }
            for t in 2..n {
                s22 += 2.0 * cells[t - 2].u * cells[t].u;
            }
            for t in 0..n {
                s22 -= m[t] * cells[t].u;
            }
        }
    }
    let inv = 1.0 / n as f64;
    e.value *= inv;
    e.score *= inv;
    for i in 0..d1 {
        for j in 0..i {
            e.hessian[(j, i)] = e.hessian[(i, j)];
        }
        e.hessian[(i, d1)] = cross[i];
        e.hessian[(d1, i)] = cross[i];
    }
    e.hessian[(d1, d1)] = s22;
    e.hessian *= inv;
    e
}

/// Dynamic-probit criterion, value/score/Hessian at `(beta1, beta2 = 0)`.
pub fn probit_constrained_eval(beta1: &[f64], y: &[u8], x: &DMatrix<f64>, curv: Beta2Curvature) -> Result<CriterionEval> {
    if y.len() != x.nrows() || y.is_empty() {
        return Err(IndiiError::Dimension("outcomes and covariates differ in length".into()));
    }
    let m = capped_index(x, beta1)?;
    let cells: Vec<Cell> = y.iter().zip(m.iter()).map(|(&yt, &mt)| cell(yt, mt)).collect();
    Ok(eval_cells(&cells, &m, x, curv))
}

/// Auxiliary probit with the (false) restriction beta2 = 0; beta = (beta1', beta2).
#[derive(Debug, Clone)]
pub struct ProbitCriterion {
    pub d1: usize,
    pub curvature: Beta2Curvature,
    spec: ConstraintSpec,
}

impl ProbitCriterion {
    pub fn new(d1: usize) -> Self {
        Self { d1, curvature: Beta2Curvature::Exact, spec: zero_last_spec(d1 + 1, "beta2 = 0") }
    }

    pub fn with_curvature(mut self, c: Beta2Curvature) -> Self {
        self.curvature = c;
        self
    }

    fn split<'a>(&self, beta: &'a DVector<f64>) -> Result<&'a [f64]> {
        if beta.len() != self.d1 + 1 {
            return Err(IndiiError::Dimension(format!("probit beta needs {} entries", self.d1 + 1)));
        }
        if beta[self.d1] != 0.0 {
            return Err(IndiiError::Domain(format!("probit criterion is available only at beta2 = 0, got {}", beta[self.d1])));
        }
        Ok(&beta.as_slice()[..self.d1])
    }
}

impl Criterion for ProbitCriterion {
    type Data = ProbitData;

    fn name(&self) -> String {
        "probit0".into()
    }

    fn dim(&self) -> usize {
        self.d1 + 1
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.d1).map(|i| format!("beta1_{i}")).collect();
        v.push("beta2".into());
        v
    }

    fn constraints(&self) -> &ConstraintSpec {
        &self.spec
    }

    fn sample_size(&self, data: &ProbitData) -> usize {
        data.y.len()
    }

    fn evaluate(&self, beta: &DVector<f64>, data: &ProbitData) -> Result<CriterionEval> {
        let b1 = self.split(beta)?;
        probit_constrained_eval(b1, &data.y, &data.x, self.curvature)
    }

    fn score_contributions(&self, beta: &DVector<f64>, data: &ProbitData) -> Result<DMatrix<f64>> {
        let b1 = self.split(beta)?;
        let u = generalized_residuals(b1, &data.y, &data.x)?;
        let n = u.len();
        let mut c = DMatrix::zeros(n, self.d1 + 1);
        for t in 0..n {
            for i in 0..self.d1 {
                c[(t, i)] = u[t] * data.x[(t, i)];
            }
            if t > 0 {
                c[(t, self.d1)] = u[t - 1] * u[t];
            }
        }
        Ok(c)
    }

    fn default_start(&self, _data: &ProbitData) -> DVector<f64> {
        DVector::zeros(self.d1 + 1)
    }

    /// Paths sharing covariates reuse one table of per-period cells per outcome value.
    fn evaluate_pooled(&self, beta: &DVector<f64>, data: &[ProbitData]) -> Result<CriterionEval> {
        let first = data.first().ok_or_else(|| IndiiError::Dimension("no samples".into()))?;
        if !data.iter().all(|d| Arc::ptr_eq(&d.x, &first.x) && d.y.len() == first.y.len()) {
            let evals = data.iter().map(|d| self.evaluate(beta, d)).collect::<Result<Vec<_>>>()?;
            return super::average_evals(&evals);
        }
        let b1 = self.split(beta)?;
        let m = capped_index(&first.x, b1)?;
        let table: Vec<[Cell; 2]> = m.iter().map(|&mt| [cell(0, mt), cell(1, mt)]).collect();
        let mut cells = Vec::with_capacity(m.len());
        let mut evals = Vec::with_capacity(data.len());
        for d in data {
            cells.clear();
            cells.extend(d.y.iter().zip(&table).map(|(&yt, tb)| tb[yt as usize]));
            evals.push(eval_cells(&cells, &m, &first.x, self.curvature));
        }
        super::average_evals(&evals)
    }
}
