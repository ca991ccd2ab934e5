use super::algebra::{avar_beta, ii_avar_theta, SelectionMatrix};
use super::systems::{MomentSystem, Sample};
use crate::error::{IndiiError, Result};
use crate::ii::{grid_minimize, levenberg_marquardt, GridSpec, PolishOptions};
use crate::linalg::{inverse, inverse_pd, symmetrize};
use crate::rng::{derive_seed, purpose, stream_rng};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX: usize = 100;

fn newton<F>(a: &SelectionMatrix, start: &DVector<f64>, moments: F) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let mut beta = start.clone();
    let (g, mut jac) = moments(&beta)?;
    let mut r = &a.0 * &g;
    for it in 0..NEWTON_MAX {
        if r.norm() < NEWTON_TOL {
            return Ok(beta);
        }
        let step = inverse(&(&a.0 * &jac), "A Gamma")? * &r;
        let mut t = 1.0;
        loop {
            let cand = &beta - &step * t;
            if let Ok((g2, j2)) = moments(&cand) {
                let r2 = &a.0 * &g2;
                if r2.norm() < r.norm() || t < 1e-8 {
                    beta = cand;
                    jac = j2;
                    r = r2;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-12 {
                return Err(IndiiError::NoConvergence { iterations: it, reason: "line search failed".into() });
            }
        }
    }
    if r.norm() < NEWTON_TOL {
        return Ok(beta);
    }
    Err(IndiiError::NoConvergence { iterations: NEWTON_MAX, reason: format!("|A g| = {:.3e}", r.norm()) })
}

/// Newton solve of `A g(beta) = 0` on the sample, from `start`.
pub fn solve_selected(a: &SelectionMatrix, system: &MomentSystem, sample: &Sample, start: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(a, system)?;
    newton(a, start, |b| system.sample_moments(b, sample))
}

/// `b_A(theta)`: the solution of `A E_theta[g(beta)] = 0`, started at beta0.
pub fn binding_function(a: &SelectionMatrix, system: &MomentSystem, theta: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(a, system)?;
    newton(a, &system.beta0, |b| system.population_moments(b, theta))
}

fn check_dims(a: &SelectionMatrix, system: &MomentSystem) -> Result<()> {
    if a.q() != system.q() || a.d_beta() != system.d_beta() {
        return Err(IndiiError::Dimension(format!(
            "A is {}x{}, system needs {}x{}",
            a.d_beta(),
            a.q(),
            system.d_beta(),
            system.q()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct OverIdEstimate {
    pub theta_hat: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub objective: f64,
    pub w: DMatrix<f64>,
}

/// Wald I-I: minimize `(beta_hat(A) - b_A(theta))' W (beta_hat(A) - b_A(theta))`.
/// `w = None` uses `W*(A) = avar_beta(A)^{-1}`.
pub fn wald_ii_overid(
    a: &SelectionMatrix,
    w: Option<&DMatrix<f64>>,
    system: &MomentSystem,
    sample: &Sample,
    grid: &GridSpec,
) -> Result<OverIdEstimate> {
    let w = match w {
        Some(w) => w.clone(),
        None => symmetrize(&inverse_pd(&avar_beta(a, &system.gamma, &system.v)?, "Avar(beta_hat(A))")?),
    };
    let beta_hat = solve_selected(a, system, sample, &system.beta0)?;
    let lt = w.clone().cholesky().ok_or_else(|| IndiiError::NotPositiveDefinite("W".into()))?.l().transpose();
    let resid = |theta: &[f64]| -> Option<DVector<f64>> {
        let b = binding_function(a, system, &DVector::from_column_slice(theta)).ok()?;
        Some(&lt * (&beta_hat - b))
    };
    let bounds = system.theta_bounds();
    let res = grid_minimize(|th| resid(th).map(|r| r.norm_squared()), &bounds, grid)?;
    let mut trace = Vec::new();
    let (theta, value) = match levenberg_marquardt(resid, &res.theta, &bounds, &PolishOptions::default(), &mut trace) {
        Some(p) if p.value <= res.value => (p.theta, p.value),
        _ => (res.theta, res.value),
    };
    Ok(OverIdEstimate { theta_hat: DVector::from_vec(theta), beta_hat, objective: value, w })
}

#[derive(Debug, Clone)]
pub struct OverIdMonteCarlo {
    pub names: Vec<String>,
    /// Per selection matrix: one estimate per successful replication.
    pub estimates: Vec<Vec<DVector<f64>>>,
    /// Empirical covariance of `sqrt(T) (theta_hat - theta0)`, divisor R.
    pub scaled_variance: Vec<DMatrix<f64>>,
    /// `ii_avar_theta(A)` where identified.
    pub theory: Vec<Option<DMatrix<f64>>>,
    pub failures: usize,
}

/// Replicate `wald_ii_overid` with `W*(A)` for each selection matrix on common samples.
pub fn monte_carlo_variance(
    system: &MomentSystem,
    selections: &[(String, SelectionMatrix)],
    reps: usize,
    t: usize,
    seed: u64,
) -> Result<OverIdMonteCarlo> {
    let grid = GridSpec { points: 11, sweeps: 3, refinements: 2, line_points: 11, iterations: 1, candidates: 0 };
    let rows: Vec<Option<Vec<DVector<f64>>>> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(derive_seed(seed, &[r as u64, purpose::OVERID]), 0);
            let sample = system.draw_sample(t, &mut rng);
            selections
                .iter()
                .map(|(_, a)| wald_ii_overid(a, None, system, &sample, &grid).map(|e| e.theta_hat))
                .collect::<Result<Vec<_>>>()
                .ok()
        })
        .collect();
    let failures = rows.iter().filter(|r| r.is_none()).count();
    let ok: Vec<Vec<DVector<f64>>> = rows.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(IndiiError::TooManyFailures { failed: failures, total: reps });
    }
    let k = selections.len();
    let estimates: Vec<Vec<DVector<f64>>> = (0..k).map(|j| ok.iter().map(|row| row[j].clone()).collect()).collect();
    let scaled_variance = estimates
        .iter()
        .map(|est| {
            let n = est.len() as f64;
            let mean = est.iter().fold(DVector::zeros(system.d_theta()), |acc, e| acc + e) / n;
            let mut cov = DMatrix::zeros(system.d_theta(), system.d_theta());
            for e in est {
                let d = e - &mean;
                cov += &d * d.transpose();
            }
            cov * (t as f64 / n)
        })
        .collect();
    let theory = selections.iter().map(|(_, a)| ii_avar_theta(a, &system.gamma_theta, &system.v).ok()).collect();
    Ok(OverIdMonteCarlo { names: selections.iter().map(|s| s.0.clone()).collect(), estimates, scaled_variance, theory, failures })
}
