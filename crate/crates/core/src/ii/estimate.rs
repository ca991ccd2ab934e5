use super::polish::{levenberg_marquardt, PolishOptions};
use super::grid::{grid_minimize, GridSpec, ThetaBounds, TraceEntry};
use super::moments::{beta_tilde_c, beta_tilde_cfs, beta_tilde_func_demo, m_bar, m_cfs, ObservedAux, SimulatedCriterion};
use super::variance::{asymptotic_variance, d_l_d_theta, estimate_info_matrices, AsymptoticVariance, InfoMatrices};
use crate::aux::Criterion;
use crate::constrained::FitOptions;
use crate::error::{IndiiError, Result};
use crate::linalg::{inverse_pd, require_pd};
use crate::sim::StructuralModel;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    ScoreOurs,
    ScoreCfs,
    WaldCfs,
    WaldC,
    WaldFuncDemo,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::ScoreOurs, Variant::ScoreCfs, Variant::WaldCfs, Variant::WaldC, Variant::WaldFuncDemo];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::ScoreOurs => "score-ours",
            Variant::ScoreCfs => "score-cfs",
            Variant::WaldCfs => "wald-cfs",
            Variant::WaldC => "wald-c",
            Variant::WaldFuncDemo => "wald-func-demo",
        }
    }

    pub fn is_score(&self) -> bool {
        matches!(self, Variant::ScoreOurs | Variant::ScoreCfs)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = IndiiError;
    fn from_str(s: &str) -> Result<Self> {
        let k = s.replace('_', "-").to_ascii_lowercase();
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.as_str() == k)
            .ok_or_else(|| IndiiError::InvalidParameter(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct IIConfig {
    pub h: usize,
    /// Weighting matrix; `None` means the identity.
    pub w: Option<DMatrix<f64>>,
    pub variant: Variant,
    pub grid: GridSpec,
    pub bounds: ThetaBounds,
    pub seed: u64,
    pub compute_variance: bool,
    pub fit: FitOptions,
    /// Levenberg-Marquardt finish after the grid search; `None` keeps the grid optimum.
    pub polish: Option<PolishOptions>,
    pub search_metric: SearchMetric,
}

/// Metric used by the grid stage. The polish always uses `W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchMetric {
    /// The configured `W`.
    Weighting,
    /// `J^{-1}`, which makes the grid objective invariant to rescaling beta.
    InverseJ,
}

impl IIConfig {
    pub fn new(bounds: ThetaBounds, seed: u64) -> Self {
        Self {
            h: 10,
            w: None,
            variant: Variant::ScoreOurs,
            grid: GridSpec::default(),
            bounds,
            seed,
            compute_variance: false,
            fit: FitOptions::default(),
            polish: Some(PolishOptions::default()),
            search_metric: SearchMetric::InverseJ,
        }
    }

    pub fn sv(seed: u64) -> Self {
        Self::new(ThetaBounds::sv_default(), seed)
    }

    pub fn probit(d1: usize, seed: u64) -> Self {
        Self::new(ThetaBounds::probit_default(d1), seed)
    }

    pub fn with_variant(mut self, v: Variant) -> Self {
        self.variant = v;
        self
    }

    pub fn weighting(&self, d: usize) -> Result<DMatrix<f64>> {
        match &self.w {
            None => Ok(DMatrix::identity(d, d)),
            Some(w) if w.nrows() == d && w.ncols() == d => {
                require_pd(w, "weighting matrix W")?;
                Ok(w.clone())
            }
            Some(w) => Err(IndiiError::Dimension(format!("W is {}x{}, need {d}x{d}", w.nrows(), w.ncols()))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.h == 0 {
            return Err(IndiiError::InvalidParameter("H must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct IIEstimate {
    pub theta_hat: Vec<f64>,
    pub variant: Variant,
    pub objective: f64,
    /// `m` for score variants, `beta_hat - beta_tilde` for Wald variants.
    pub moments: DVector<f64>,
    pub omega_hat: Option<AsymptoticVariance>,
    pub variance_error: Option<String>,
    pub on_boundary: bool,
    pub resolution: Vec<f64>,
    pub evaluations: usize,
    pub trace: Vec<TraceEntry>,
    pub beta_r: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub lambda: DVector<f64>,
    pub binding: Vec<usize>,
}

/// Objective value and moment vector of `variant` at `theta`.
pub fn objective<M, C>(
    variant: Variant,
    theta: &[f64],
    obs: &ObservedAux,
    sim: &SimulatedCriterion<'_, M, C>,
    w: &DMatrix<f64>,
) -> Result<(f64, DVector<f64>)>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let (m, metric) = objective_parts(variant, theta, obs, sim)?;
    let v = metric.dot(&(w * &metric));
    if !v.is_finite() {
        return Err(IndiiError::Domain("non-finite objective".into()).at_theta(theta));
    }
    Ok((v, m))
}

/// Reported moment vector and the vector whose W-norm is the objective.
fn objective_parts<M, C>(
    variant: Variant,
    theta: &[f64],
    obs: &ObservedAux,
    sim: &SimulatedCriterion<'_, M, C>,
) -> Result<(DVector<f64>, DVector<f64>)>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    Ok(match variant {
        Variant::ScoreOurs => {
            let m = m_bar(theta, obs, sim)?;
            (m.clone(), m)
        }
        Variant::ScoreCfs => {
            let m = m_cfs(theta, obs, sim)?;
            (m.clone(), m)
        }
        Variant::WaldCfs | Variant::WaldC | Variant::WaldFuncDemo => {
            let bt = match variant {
                Variant::WaldCfs => beta_tilde_cfs(theta, sim, obs)?,
                Variant::WaldC => beta_tilde_c(theta, sim, obs)?,
                _ => beta_tilde_func_demo(theta, sim, obs)?,
            };
            let e = obs.beta_hat() - bt;
            let je = &obs.j_hat * &e;
            (e, je)
        }
    })
}

/// Fit the auxiliary model on `data`, then minimize the configured objective.
pub fn estimate<M, C>(config: &IIConfig, model: &M, crit: &C, data: &C::Data) -> Result<IIEstimate>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    config.validate()?;
    let obs = ObservedAux::with_options(crit, data, &config.fit)?;
    let sim = SimulatedCriterion::new(model, crit, config.h, crit.sample_size(data), config.seed);
    let info = if config.compute_variance { Some(estimate_info_matrices(crit, data, &obs.fit)?) } else { None };
    estimate_with(config, &sim, &obs, info.as_ref())
}

pub fn estimate_with<M, C>(
    config: &IIConfig,
    sim: &SimulatedCriterion<'_, M, C>,
    obs: &ObservedAux,
    info: Option<&InfoMatrices>,
) -> Result<IIEstimate>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    config.validate()?;
    let d = sim.crit.dim();
    if config.bounds.dim() != sim.model.dim_theta() {
        return Err(IndiiError::Dimension(format!(
            "theta bounds have {} coordinates, model has {}",
            config.bounds.dim(),
            sim.model.dim_theta()
        )));
    }
    let w = config.weighting(d)?;
    let search = match config.search_metric {
        SearchMetric::Weighting => w.clone(),
        SearchMetric::InverseJ => match inverse_pd(&obs.j_hat, "J") {
            Ok(m) => m,
            Err(e) => {
                log::warn!("grid search falls back to W: {e}");
                w.clone()
            }
        },
    };
    let res = grid_minimize(
        |theta| match objective(config.variant, theta, obs, sim, &search) {
            Ok((v, _)) => Some(v),
            Err(e) => {
                log::debug!("objective unavailable: {e}");
                None
            }
        },
        &config.bounds,
        &config.grid,
    )?;
    let mut res = res;
    if let Some(popts) = &config.polish {
        let grid_value = objective(config.variant, &res.theta, obs, sim, &w).map(|r| r.0).unwrap_or(f64::INFINITY);
        // each start is polished first in the search metric, then in W
        let metrics = if search == w { vec![&w] } else { vec![&search, &w] };
        let mut starts = vec![res.theta.clone()];
        starts.extend(res.candidates.iter().cloned());
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in starts {
            let mut x = start;
            for metric in &metrics {
                let Some(chol) = (*metric).clone().cholesky() else { continue };
                let lt = chol.l().transpose();
                let residual =
                    |theta: &[f64]| objective_parts(config.variant, theta, obs, sim).ok().map(|(_, m)| &lt * m);
                if let Some(p) = levenberg_marquardt(residual, &x, &config.bounds, popts, &mut res.trace) {
                    res.evaluations += p.evaluations;
                    x = p.theta;
                }
            }
            if let Ok((v, _)) = objective(config.variant, &x, obs, sim, &w) {
                if best.as_ref().map_or(true, |b| v < b.1) {
                    best = Some((x, v));
                }
            }
        }
        if let Some((x, v)) = best {
            if v <= grid_value {
                res.theta = x;
                res.value = v;
                res.on_boundary =
                    (0..res.theta.len()).any(|i| res.theta[i] <= config.bounds.lo[i] || res.theta[i] >= config.bounds.hi[i]);
            }
        }
    }
    let (value, moments) = objective(config.variant, &res.theta, obs, sim, &w)?;
    let (omega_hat, variance_error) = match info {
        None => (None, None),
        Some(info) => match d_l_d_theta(sim, &res.theta, obs.beta_r())
            .and_then(|dl| asymptotic_variance(&dl, &info.i_hat, &info.j_hat, &w, config.h))
        {
            Ok(v) => (Some(v), None),
            Err(e) => {
                log::warn!("asymptotic variance unavailable: {e}");
                (None, Some(e.to_string()))
            }
        },
    };
    Ok(IIEstimate {
        theta_hat: res.theta,
        variant: config.variant,
        objective: value,
        moments,
        omega_hat,
        variance_error,
        on_boundary: res.on_boundary,
        resolution: res.resolution,
        evaluations: res.evaluations,
        trace: res.trace,
        beta_r: obs.fit.beta_r.clone(),
        beta_hat: obs.func.beta_hat.clone(),
        lambda: obs.fit.lambda.clone(),
        binding: obs.fit.binding.clone(),
    })
}

fn require_family(config: &IIConfig, allowed: &[Variant], default: Variant) -> IIConfig {
    let mut c = config.clone();
    if !allowed.contains(&c.variant) {
        c.variant = default;
    }
    c
}

/// Score-based estimator; uses `config.variant` when it is a score variant, else ours.
pub fn estimate_score_ii<M, C>(config: &IIConfig, model: &M, crit: &C, data: &C::Data) -> Result<IIEstimate>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let c = require_family(config, &[Variant::ScoreOurs, Variant::ScoreCfs], Variant::ScoreOurs);
    estimate(&c, model, crit, data)
}

pub fn estimate_wald_cfs<M, C>(config: &IIConfig, model: &M, crit: &C, data: &C::Data) -> Result<IIEstimate>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    estimate(&config.clone().with_variant(Variant::WaldCfs), model, crit, data)
}

pub fn estimate_wald_c<M, C>(config: &IIConfig, model: &M, crit: &C, data: &C::Data) -> Result<IIEstimate>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    estimate(&config.clone().with_variant(Variant::WaldC), model, crit, data)
}
