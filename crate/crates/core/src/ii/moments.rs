use crate::aux::{Criterion, CriterionEval, Pooled};
use crate::constrained::{func_estimator, maximize_constrained, maximize_constrained_with, ConstrainedFit, FitOptions, FuncEstimate};
use crate::error::{IndiiError, Result};
use crate::linalg::{inverse, symmetrize};
use crate::sim::{draw_innovation_bank, InnovationBank, StructuralModel};
use nalgebra::{DMatrix, DVector};

/// Everything the estimators need from the observed sample.
#[derive(Debug, Clone)]
pub struct ObservedAux {
    pub fit: ConstrainedFit,
    pub func: FuncEstimate,
    /// `-Hessian(beta_r)`, symmetrized.
    pub j_hat: DMatrix<f64>,
    pub t: usize,
}

impl ObservedAux {
    pub fn new<C: Criterion>(crit: &C, data: &C::Data) -> Result<Self> {
        Self::with_options(crit, data, &FitOptions::default())
    }

    pub fn with_options<C: Criterion>(crit: &C, data: &C::Data, opts: &FitOptions) -> Result<Self> {
        let fit = maximize_constrained_with(crit, data, &crit.default_start(data), opts)?.require_converged()?;
        Self::from_fit(fit)
    }

    pub fn from_fit(fit: ConstrainedFit) -> Result<Self> {
        let func = func_estimator(&fit)?;
        let j_hat = symmetrize(&(-&fit.eval.hessian));
        let t = fit.t;
        Ok(Self { fit, func, j_hat, t })
    }

    pub fn beta_hat(&self) -> &DVector<f64> {
        &self.func.beta_hat
    }

    pub fn beta_r(&self) -> &DVector<f64> {
        &self.fit.beta_r
    }
}

/// `Q_TH(theta, beta)`: the criterion pooled over `H` paths simulated from a frozen bank.
pub struct SimulatedCriterion<'a, M: StructuralModel, C: Criterion<Data = M::Data>> {
    pub model: &'a M,
    pub crit: &'a C,
    pub bank: InnovationBank,
}

impl<'a, M, C> SimulatedCriterion<'a, M, C>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    pub fn new(model: &'a M, crit: &'a C, h: usize, t: usize, seed: u64) -> Self {
        let bank = draw_innovation_bank(h, t, model.bank_columns(), seed);
        Self { model, crit, bank }
    }

    pub fn with_bank(model: &'a M, crit: &'a C, bank: InnovationBank) -> Self {
        Self { model, crit, bank }
    }

    pub fn h(&self) -> usize {
        self.bank.h
    }

    pub fn simulate(&self, theta: &[f64]) -> Result<Vec<M::Data>> {
        self.model.check_theta(theta).map_err(|e| e.at_theta(theta))?;
        self.bank
            .paths()
            .map(|p| self.model.simulate(theta, p))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.at_theta(theta))
    }

    pub fn evaluate(&self, theta: &[f64], beta: &DVector<f64>) -> Result<CriterionEval> {
        let paths = self.simulate(theta)?;
        self.evaluate_paths(theta, &paths, beta)
    }

    fn evaluate_paths(&self, theta: &[f64], paths: &[M::Data], beta: &DVector<f64>) -> Result<CriterionEval> {
        let e = self.crit.evaluate_pooled(beta, paths).map_err(|e| e.at_theta(theta))?;
        if !e.is_finite() {
            return Err(IndiiError::Domain("non-finite simulated criterion".into()).at_theta(theta));
        }
        Ok(e)
    }

    /// Constrained fit on the pooled simulated paths, warm-started at `start`.
    pub fn fit(&self, theta: &[f64], start: &DVector<f64>) -> Result<ConstrainedFit> {
        let paths = self.simulate(theta)?;
        let pooled = Pooled { inner: self.crit };
        let fit = maximize_constrained(&pooled, &paths, start).map_err(|e| e.at_theta(theta))?;
        fit.require_converged().map_err(|e| e.at_theta(theta))
    }
}

/// Simulated score plus simulated Hessian times the FUNC step, both at `beta_r`.
pub fn m_bar<M, C>(theta: &[f64], obs: &ObservedAux, sim: &SimulatedCriterion<'_, M, C>) -> Result<DVector<f64>>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let e = sim.evaluate(theta, obs.beta_r())?;
    Ok(&e.score + &e.hessian * (obs.beta_hat() - obs.beta_r()))
}

/// Simulated score recentred by the observed score, both at `beta_r`.
pub fn m_cfs<M, C>(theta: &[f64], obs: &ObservedAux, sim: &SimulatedCriterion<'_, M, C>) -> Result<DVector<f64>>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let e = sim.evaluate(theta, obs.beta_r())?;
    Ok(&e.score - &obs.fit.eval.score)
}

/// One Newton step on the simulated criterion from the observed `beta_r`.
pub fn beta_tilde_c<M, C>(theta: &[f64], sim: &SimulatedCriterion<'_, M, C>, obs: &ObservedAux) -> Result<DVector<f64>>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let e = sim.evaluate(theta, obs.beta_r())?;
    let hinv = inverse(&e.hessian, "simulated Hessian").map_err(|e| e.at_theta(theta))?;
    Ok(obs.beta_r() - hinv * e.score)
}

/// Simulated constrained estimate plus the observed-Hessian multiplier correction.
pub fn beta_tilde_cfs<M, C>(theta: &[f64], sim: &SimulatedCriterion<'_, M, C>, obs: &ObservedAux) -> Result<DVector<f64>>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let fit = sim.fit(theta, obs.beta_r())?;
    let hinv = inverse(&obs.fit.eval.hessian, "observed Hessian")?;
    let corr = obs.fit.jacobian.transpose() * &fit.lambda;
    Ok(&fit.beta_r + hinv * corr)
}

/// FUNC on the simulated criterion. Matching against this does not give a consistent estimator in general.
pub fn beta_tilde_func_demo<M, C>(
    theta: &[f64],
    sim: &SimulatedCriterion<'_, M, C>,
    obs: &ObservedAux,
) -> Result<DVector<f64>>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let fit = sim.fit(theta, obs.beta_r())?;
    Ok(func_estimator(&fit).map_err(|e| e.at_theta(theta))?.beta_hat)
}
