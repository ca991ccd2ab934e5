use super::design::{CriterionId, DesignKind, McDesign};
use super::summary::{summarize, McSummary};
use crate::aux::{constraint_values, default_eta_gap, Criterion, GarchCriterion, ProbitCriterion, ProbitData};
use crate::constrained::{maximize_constrained_with, score_test, FitOptions};
use crate::error::{IndiiError, Result};
use crate::ii::{estimate_with, IIConfig, ObservedAux, PolishOptions, SimulatedCriterion, ThetaBounds};
use crate::overid::{monte_carlo_variance, optimal_a_for_theta, naive_optimal_a, MomentSystem};
use crate::rng::{derive_seed, purpose, stream_rng};
use crate::sim::{draw_innovation_bank, probit_covariates, ProbitModel, StructuralModel, SvModel};
use nalgebra::DMatrix;
use rand_distr::StandardNormal;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use std::time::Instant;

/// A FUNC component counts as violating when `g_j(beta_hat) - a_j` falls below this.
pub const VIOLATION_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub name: String,
    pub theta: Vec<f64>,
    pub objective: f64,
    pub on_boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreTestRecord {
    pub xi: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub error: Option<String>,
    pub beta_r: Vec<f64>,
    pub beta_hat: Vec<f64>,
    pub lambda: Vec<f64>,
    pub binding: Vec<bool>,
    pub func_violation: Vec<bool>,
    pub score_test: Option<ScoreTestRecord>,
    pub estimates: Vec<EstimateRecord>,
}

impl RepRecord {
    fn failed(rep: usize, e: IndiiError) -> Self {
        Self {
            rep,
            error: Some(e.to_string()),
            beta_r: vec![],
            beta_hat: vec![],
            lambda: vec![],
            binding: vec![],
            func_violation: vec![],
            score_test: None,
            estimates: vec![],
        }
    }

    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct McRun {
    pub design: McDesign,
    pub records: Vec<RepRecord>,
    pub summary: McSummary,
    pub constraint_labels: Vec<String>,
    pub param_names: Vec<String>,
}

impl McRun {
    pub fn require_valid(&self) -> Result<&Self> {
        if self.summary.valid {
            Ok(self)
        } else {
            Err(IndiiError::TooManyFailures { failed: self.summary.failed, total: self.summary.reps })
        }
    }
}

fn ii_config(design: &McDesign, bounds: ThetaBounds, seed: u64) -> IIConfig {
    let mut c = IIConfig::new(bounds, seed);
    c.h = design.h;
    c.grid = design.grid;
    c.search_metric = design.search_metric;
    c.polish = design.polish.then(PolishOptions::default);
    c
}

/// Auxiliary fit, FUNC, optional score test and the I-I estimates on one sample.
fn replicate<M, C>(design: &McDesign, model: &M, crit: &C, data: &C::Data, rep: usize, bounds: &ThetaBounds) -> Result<RepRecord>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let t = crit.sample_size(data);
    let fit = maximize_constrained_with(crit, data, &crit.default_start(data), &FitOptions::default())?.require_converged()?;
    let q = crit.constraints().len();
    let binding = (0..q).map(|j| fit.is_binding(j)).collect();
    let obs = ObservedAux::from_fit(fit)?;
    let after = constraint_values(obs.beta_hat(), crit.constraints(), t);
    let func_violation = (0..q).map(|j| !crit.constraints().is_equality(j) && after.slack[j] < VIOLATION_TOL).collect();
    let n_eq = crit.constraints().equality_count();
    let score_test = if n_eq > 0 {
        let st = score_test(&obs.fit, &obs.func, t, n_eq)?;
        Some(ScoreTestRecord { xi: st.xi, p_value: st.p_value })
    } else {
        None
    };
    let mut estimates = Vec::new();
    if design.run_ii {
        let sim_seed = derive_seed(design.seed, &[rep as u64, purpose::SIM]);
        let sim = SimulatedCriterion::new(model, crit, design.h, t, sim_seed);
        for v in &design.variants {
            let cfg = ii_config(design, bounds.clone(), sim_seed).with_variant(*v);
            let est = estimate_with(&cfg, &sim, &obs, None)?;
            estimates.push(EstimateRecord {
                name: v.as_str().into(),
                theta: est.theta_hat,
                objective: est.objective,
                on_boundary: est.on_boundary,
            });
        }
    }
    Ok(RepRecord {
        rep,
        error: None,
        beta_r: obs.fit.beta_r.iter().copied().collect(),
        beta_hat: obs.beta_hat().iter().copied().collect(),
        lambda: obs.fit.lambda.iter().copied().collect(),
        binding,
        func_violation,
        score_test,
        estimates,
    })
}

fn run_reps(reps: usize, f: impl Fn(usize) -> Result<RepRecord> + Sync) -> Vec<RepRecord> {
    (0..reps)
        .into_par_iter()
        .map(|r| match f(r) {
            Ok(rec) => rec,
            Err(e) => {
                log::warn!("replication {r} failed: {e}");
                RepRecord::failed(r, e)
            }
        })
        .collect()
}

fn garch_for(design: &McDesign) -> GarchCriterion {
    match design.criterion {
        CriterionId::GarchT => GarchCriterion::student(design.phi_bound, default_eta_gap()),
        _ => GarchCriterion::gaussian(design.phi_bound),
    }
}

pub fn run_design(design: &McDesign) -> Result<McRun> {
    design.validate()?;
    let clock = Instant::now();
    let (records, labels, names) = match design.kind {
        DesignKind::Jpr1 | DesignKind::Jpr2 => {
            let crit = garch_for(design);
            let model = SvModel;
            model.check_theta(&design.theta0)?;
            let bounds = ThetaBounds::sv_default();
            let recs = run_reps(design.reps, |r| {
                let bank = draw_innovation_bank(1, design.t, model.bank_columns(), derive_seed(design.seed, &[r as u64, purpose::DATA]));
                let y = model.simulate(&design.theta0, bank.path(0))?;
                replicate(design, &model, &crit, &y, r, &bounds)
            });
            (recs, crit.constraints().labels(), model.theta_names())
        }
        DesignKind::ProbitNull | DesignKind::ProbitAlt => {
            let d1 = design.theta0.len() - 1;
            let x = covariates(design, d1)?;
            let model = ProbitModel::new(x);
            model.check_theta(&design.theta0)?;
            let crit = ProbitCriterion::new(d1);
            let bounds = ThetaBounds::probit_default(d1);
            let recs = run_reps(design.reps, |r| {
                let bank = draw_innovation_bank(1, design.t, model.bank_columns(), derive_seed(design.seed, &[r as u64, purpose::DATA]));
                let data: ProbitData = model.simulate(&design.theta0, bank.path(0))?;
                replicate(design, &model, &crit, &data, r, &bounds)
            });
            (recs, crit.constraints().labels(), model.theta_names())
        }
        DesignKind::Overid => return run_overid(design, clock),
    };
    finish(design, records, labels, names, clock)
}

fn covariates(design: &McDesign, d1: usize) -> Result<Arc<DMatrix<f64>>> {
    Ok(Arc::new(probit_covariates(design.t, d1, derive_seed(design.seed, &[purpose::COVARIATES]))?))
}

fn finish(
    design: &McDesign,
    records: Vec<RepRecord>,
    labels: Vec<String>,
    names: Vec<String>,
    clock: Instant,
) -> Result<McRun> {
    let mut summary = summarize(design, &records, &labels, &names);
    summary.wall_seconds = clock.elapsed().as_secs_f64();
    Ok(McRun { design: design.clone(), records, summary, constraint_labels: labels, param_names: names })
}

fn run_overid(design: &McDesign, clock: Instant) -> Result<McRun> {
    let system = MomentSystem::by_name(&design.instance, derive_seed(design.seed, &[purpose::OVERID]))?;
    let naive = naive_optimal_a(&system.gamma, &system.v)?;
    let extra = system.d_beta() - system.d_theta();
    let mut rng = stream_rng(derive_seed(design.seed, &[purpose::OVERID, 1]), 0);
    let c = DMatrix::from_fn(system.q(), extra, |_, _| rng.sample::<f64, _>(StandardNormal));
    let optimal = optimal_a_for_theta(&system.gamma_theta, &system.v, &c)?;
    let sel = vec![("naive".to_string(), naive), ("optimal".to_string(), optimal)];
    let mc = monte_carlo_variance(&system, &sel, design.reps, design.t, design.seed)?;
    let n_ok = mc.estimates[0].len();
    let records: Vec<RepRecord> = (0..n_ok)
        .map(|r| RepRecord {
            rep: r,
            error: None,
            beta_r: vec![],
            beta_hat: vec![],
            lambda: vec![],
            binding: vec![],
            func_violation: vec![],
            score_test: None,
            estimates: sel
                .iter()
                .enumerate()
                .map(|(j, (name, _))| EstimateRecord {
                    name: name.clone(),
                    theta: mc.estimates[j][r].iter().copied().collect(),
                    objective: f64::NAN,
                    on_boundary: false,
                })
                .collect(),
        })
        .chain((0..mc.failures).map(|k| RepRecord::failed(n_ok + k, IndiiError::NoConvergence { iterations: 0, reason: "overid replication".into() })))
        .collect();
    let mut d = design.clone();
    d.theta0 = system.theta0.iter().copied().collect();
    let names = (0..system.d_theta()).map(|i| format!("theta{}", i + 1)).collect();
    finish(&d, records, vec![], names, clock)
}
