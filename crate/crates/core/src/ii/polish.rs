//! Box-projected Levenberg-Marquardt with forward-difference Jacobians, used
//! to finish the grid search on `|r(theta)|^2`.

use super::grid::{ThetaBounds, TraceEntry};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolishOptions {
    pub max_iter: usize,
    /// Stop when the relative decrease of the objective falls below this.
    pub ftol: f64,
    /// Stop when every coordinate step is below `xtol * (1 + |theta_i|)`.
    pub xtol: f64,
}

impl Default for PolishOptions {
    fn default() -> Self {
        Self { max_iter: 100, ftol: 1e-14, xtol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct PolishResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn sq(r: &DVector<f64>) -> f64 {
    r.norm_squared()
}

pub fn levenberg_marquardt<F>(
    residual: F,
    x0: &[f64],
    bounds: &ThetaBounds,
    opts: &PolishOptions,
    trace: &mut Vec<TraceEntry>,
) -> Option<PolishResult>
where
    F: Fn(&[f64]) -> Option<DVector<f64>>,
{
    let n = x0.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(bounds.lo[i], bounds.hi[i]);
        }
    };
    let mut x = x0.to_vec();
    let mut r = residual(&x)?;
    let mut f = sq(&r);
    let mut evaluations = 1;
    let mut mu = 1e-3;
    let mut iterations = 0;
    while iterations < opts.max_iter && f > 0.0 {
        iterations += 1;
        let mut jac = DMatrix::zeros(r.len(), n);
        for i in 0..n {
            let h = 1e-7 * (1.0 + x[i].abs());
            let mut xp = x.clone();
            let (step, rp) = if x[i] + h <= bounds.hi[i] {
                xp[i] += h;
                (h, residual(&xp))
            } else {
                xp[i] -= h;
                (-h, residual(&xp))
            };
            evaluations += 1;
            let rp = rp?;
            jac.set_column(i, &((rp - &r) / step));
        }
        // damped least squares [J; sqrt(mu D)] step = [-r; 0], solved by SVD rather than
        // normal equations: badly scaled residual rows make J'J nearly singular
        let diag: Vec<f64> = (0..n).map(|i| jac.column(i).norm_squared().max(1e-300)).collect();
        let m = r.len();
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = DMatrix::zeros(m + n, n);
            a.rows_mut(0, m).copy_from(&jac);
            for i in 0..n {
                a[(m + i, i)] = (mu * diag[i]).sqrt();
            }
            let mut rhs = DVector::zeros(m + n);
            rhs.rows_mut(0, m).copy_from(&(-&r));
            let Ok(step) = a.svd(true, true).solve(&rhs, 1e-15) else {
                mu *= 10.0;
                continue;
            };
            let mut xn: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut xn);
            let moved = (0..n).any(|i| (xn[i] - x[i]).abs() > opts.xtol * (1.0 + x[i].abs()));
            if !moved {
                break;
            }
            evaluations += 1;
            match residual(&xn) {
                Some(rn) if sq(&rn) < f => {
                    let fnew = sq(&rn);
                    let rel = (f - fnew) / f.max(1e-300);
                    x = xn;
                    r = rn;
                    f = fnew;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if rel < opts.ftol {
                        accepted = false;
                    }
                    break;
                }
                _ => mu *= 4.0,
            }
        }
        if !accepted {
            break;
        }
    }
    trace.push(TraceEntry { stage: "polish".into(), theta: x.clone(), value: f });
    Some(PolishResult { theta: x, value: f, iterations, evaluations })
}
