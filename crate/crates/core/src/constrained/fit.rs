use super::qp::{solve_qp, QpProblem};
use crate::aux::{constraint_values, ConstraintSpec, ConstraintValues, Criterion, CriterionEval};
use crate::error::{IndiiError, Result};
use crate::linalg::{diag_scaling, scale_sym, sym_eigen, symmetrize};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Sup-norm tolerance on `dQ/dbeta + dg'/dbeta lambda` (mean-scaled).
    pub stationarity_tol: f64,
    /// `|g_j - a_j|` below this classifies constraint j as binding.
    pub binding_tol: f64,
    pub barrier_fallback: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_iter: 500, stationarity_tol: 1e-8, binding_tol: 1e-8, barrier_fallback: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Sqp,
    Barrier,
}

/// Constrained maximizer with Kuhn-Tucker multipliers.
#[derive(Debug, Clone)]
pub struct ConstrainedFit {
    pub beta_r: DVector<f64>,
    /// One entry per constraint, zero when not binding. Equalities carry unrestricted signs.
    pub lambda: DVector<f64>,
    pub binding: Vec<usize>,
    pub q_value: f64,
    pub eval: CriterionEval,
    /// `g(beta_r) - a_T` (equalities: `g(beta_r)`).
    pub slack: DVector<f64>,
    /// Constraint Jacobian at `beta_r`, one row per constraint.
    pub jacobian: DMatrix<f64>,
    pub equality: Vec<bool>,
    pub converged: bool,
    pub iterations: usize,
    /// Sup norm of the stationarity residual at `beta_r`.
    pub stationarity: f64,
    pub t: usize,
    pub method: FitMethod,
}

impl ConstrainedFit {
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(IndiiError::NoConvergence {
                iterations: self.iterations,
                reason: format!("stationarity residual {:e}", self.stationarity),
            })
        }
    }

    pub fn is_binding(&self, j: usize) -> bool {
        self.binding.contains(&j)
    }

    /// `dg'/dbeta lambda`.
    pub fn multiplier_term(&self) -> DVector<f64> {
        self.jacobian.transpose() * &self.lambda
    }
}

fn equality_flags(spec: &ConstraintSpec) -> Vec<bool> {
    (0..spec.len()).map(|j| spec.is_equality(j)).collect()
}

fn feasibility_violation(cv: &ConstraintValues, eq: &[bool]) -> f64 {
    cv.slack
        .iter()
        .zip(eq)
        .map(|(&s, &e)| if e { s.abs() } else { (-s).max(0.0) })
        .fold(0.0, f64::max)
}

fn min_ineq_slack(cv: &ConstraintValues, eq: &[bool]) -> f64 {
    cv.slack.iter().zip(eq).filter(|(_, &e)| !e).map(|(&s, _)| s).fold(f64::INFINITY, f64::min)
}

/// Flip and floor eigenvalues so that the (balanced) curvature is negative definite.
fn negative_definite(h: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(h);
    let top = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    let floor = 1e-8 * top;
    let mod_vals = vals.map(|v| -v.abs().max(floor));
    symmetrize(&(&vecs * DMatrix::from_diagonal(&mod_vals) * vecs.transpose()))
}

/// Least-squares multipliers on the binding rows, dropping inequality rows that come out negative.
fn recover_multipliers(s: &DVector<f64>, jac: &DMatrix<f64>, binding: &[usize], eq: &[bool]) -> DVector<f64> {
    let q = jac.nrows();
    let mut active: Vec<usize> = binding.to_vec();
    loop {
        let mut lambda = DVector::zeros(q);
        if active.is_empty() {
            return lambda;
        }
        let ga = DMatrix::from_fn(active.len(), jac.ncols(), |r, c| jac[(active[r], c)]);
        // min || s + G_a' lambda || by QR of G_a', SVD when G_a' is rank deficient
        let gt = ga.transpose();
        let qr = gt.clone().qr();
        let r = qr.r();
        let full_rank = active.len() <= gt.nrows() && r.diagonal().iter().all(|v| v.abs() > 1e-12 * r.amax().max(1e-300));
        let sol = full_rank
            .then(|| r.solve_upper_triangular(&-(qr.q().transpose() * s)))
            .flatten()
            .filter(|v| v.iter().all(|x| x.is_finite()))
            .unwrap_or_else(|| gt.svd(true, true).solve(&-s, 1e-12).unwrap_or_else(|_| DVector::zeros(active.len())));
        for (k, &j) in active.iter().enumerate() {
            lambda[j] = sol[k];
        }
        let worst = active
            .iter()
            .enumerate()
            .filter(|(_, &j)| !eq[j] && lambda[j] < -1e-10)
            .min_by(|a, b| lambda[*a.1].total_cmp(&lambda[*b.1]))
            .map(|(k, _)| k);
        match worst {
            Some(k) => {
                active.remove(k);
            }
            None => {
                for j in 0..q {
                    if !eq[j] {
                        lambda[j] = lambda[j].max(0.0);
                    }
                }
                return lambda;
            }
        }
    }
}

struct State {
    beta: DVector<f64>,
    eval: CriterionEval,
    cv: ConstraintValues,
}

fn eval_state<C: Criterion>(c: &C, data: &C::Data, beta: DVector<f64>, t: usize) -> Result<State> {
    let eval = c.evaluate(&beta, data)?;
    if !eval.is_finite() {
        return Err(IndiiError::Domain("non-finite criterion evaluation".into()));
    }
    let cv = constraint_values(&beta, c.constraints(), t);
    Ok(State { beta, eval, cv })
}

/// Maximize `Q_T(beta)` subject to `g(beta) >= a_T` and the equality constraints.
pub fn maximize_constrained<C: Criterion>(c: &C, data: &C::Data, start: &DVector<f64>) -> Result<ConstrainedFit> {
    maximize_constrained_with(c, data, start, &FitOptions::default())
}

pub fn maximize_constrained_with<C: Criterion>(
    c: &C,
    data: &C::Data,
    start: &DVector<f64>,
    opts: &FitOptions,
) -> Result<ConstrainedFit> {
    let spec = c.constraints();
    let t = c.sample_size(data);
    let eq = equality_flags(spec);
    if start.len() != c.dim() {
        return Err(IndiiError::Dimension(format!("start has {} entries, criterion {}", start.len(), c.dim())));
    }
    let usable = |b: &DVector<f64>| -> Option<State> {
        let st = eval_state(c, data, b.clone(), t).ok()?;
        (feasibility_violation(&st.cv, &eq) <= 1e-10).then_some(st)
    };
    let state = usable(start)
        .or_else(|| usable(&c.default_start(data)))
        .ok_or_else(|| IndiiError::Infeasible("neither the supplied nor the default start is feasible".into()))?;
    let q_start = state.eval.value;

    let (state, iters, ok) = sqp(c, data, state, t, &eq, opts, opts.max_iter);
    if ok {
        let state = refine(c, data, state, t, &eq, opts);
        return Ok(finalize(c, data, state, t, &eq, opts, iters, FitMethod::Sqp));
    }
    if opts.barrier_fallback && spec.all_linear() {
        log::debug!("SQP stalled after {iters} iterations; trying the barrier fallback");
        if let Ok(b) = barrier(c, data, &state, t, &eq) {
            if let Ok(st) = eval_state(c, data, b, t) {
                let (st2, it2, ok2) = sqp(c, data, st, t, &eq, opts, 100);
                if ok2 && st2.eval.value >= q_start - 1e-12 * (1.0 + q_start.abs()) {
                    let st2 = refine(c, data, st2, t, &eq, opts);
                    return Ok(finalize(c, data, st2, t, &eq, opts, iters + it2, FitMethod::Barrier));
                }
            }
        }
    }
    let mut fit = finalize(c, data, state, t, &eq, opts, iters, FitMethod::Sqp);
    fit.converged = false;
    Ok(fit)
}

fn binding_set(cv: &ConstraintValues, eq: &[bool], tol: f64) -> Vec<usize> {
    (0..eq.len()).filter(|&j| eq[j] || cv.slack[j].abs() < tol).collect()
}

fn stationarity(state: &State, eq: &[bool], tol: f64) -> (DVector<f64>, f64, Vec<usize>) {
    let binding = binding_set(&state.cv, eq, tol);
    let lambda = recover_multipliers(&state.eval.score, &state.cv.jacobian, &binding, eq);
    let r = &state.eval.score + state.cv.jacobian.transpose() * &lambda;
    (lambda, r.amax(), binding)
}

/// Returns the final state, iterations used and whether KKT conditions were met.
/// SQP direction in scaled (`z`) and original (`p`) coordinates.
fn qp_step(state: &State, eq: &[bool]) -> Result<(DVector<f64>, DVector<f64>)> {
    let q = eq.len();
    let dsc = diag_scaling(&state.eval.hessian);
    let bs = negative_definite(&scale_sym(&state.eval.hessian, &dsc));
    let ss = state.eval.score.component_mul(&dsc);
    let gs = DMatrix::from_fn(q, dsc.len(), |i, j| state.cv.jacobian[(i, j)] * dsc[j]);
    let r = -&state.cv.slack;
    let z = solve_qp(&QpProblem { b: &bs, s: &ss, g: &gs, r: &r, equality: eq })?.d;
    let p = z.component_mul(&dsc);
    Ok((z, p))
}

/// Full SQP steps after convergence, kept while each at least halves the
/// stationarity residual without losing feasibility or value.
fn refine<C: Criterion>(c: &C, data: &C::Data, mut state: State, t: usize, eq: &[bool], opts: &FitOptions) -> State {
    let (_, mut resid, _) = stationarity(&state, eq, opts.binding_tol);
    for _ in 0..3 {
        if resid == 0.0 {
            break;
        }
        let Ok((_, p)) = qp_step(&state, eq) else { break };
        let Ok(st) = eval_state(c, data, &state.beta + p, t) else { break };
        let q0 = state.eval.value;
        if feasibility_violation(&st.cv, eq) > 1e-12 || st.eval.value < q0 - 1e-12 * (1.0 + q0.abs()) {
            break;
        }
        let (_, r, _) = stationarity(&st, eq, opts.binding_tol);
        if !(r <= 0.5 * resid) {
            break;
        }
        state = st;
        resid = r;
    }
    state
}

fn sqp<C: Criterion>(
    c: &C,
    data: &C::Data,
    mut state: State,
    t: usize,
    eq: &[bool],
    opts: &FitOptions,
    max_iter: usize,
) -> (State, usize, bool) {
    for iter in 0..max_iter {
        let (_, resid, _) = stationarity(&state, eq, opts.binding_tol);
        if resid <= opts.stationarity_tol {
            return (state, iter, true);
        }
        let (z, p) = match qp_step(&state, eq) {
            Ok(v) => v,
            Err(e) => {
                log::debug!("QP subproblem failed: {e}");
                return (state, iter, false);
            }
        };
        let q0 = state.eval.value;
        let pred = state.eval.score.dot(&p);
        let tiny = pred <= 1e-15 * (1.0 + q0.abs()) || z.amax() < 1e-14;
        let mut accepted = None;
        let mut alpha = 1.0;
        for _ in 0..60 {
            let cand = &state.beta + &p * alpha;
            let cv = constraint_values(&cand, c.constraints(), t);
            if feasibility_violation(&cv, eq) > 1e-12 {
                alpha *= 0.5;
                continue;
            }
            match eval_state(c, data, cand, t) {
                Ok(st) => {
                    let ok = st.eval.value >= q0 + 1e-4 * alpha * pred
                        || (tiny && st.eval.value >= q0 - 1e-14 * (1.0 + q0.abs()));
                    if ok {
                        accepted = Some(st);
                        break;
                    }
                }
                Err(_) => {}
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(st) => {
                let moved = (&st.beta - &state.beta).amax();
                state = st;
                if tiny || moved == 0.0 {
                    let (_, resid, _) = stationarity(&state, eq, opts.binding_tol);
                    // no further progress possible: accept a near-stationary point
                    return (state, iter + 1, resid <= opts.stationarity_tol.max(1e-6));
                }
            }
            None => return (state, iter + 1, false),
        }
    }
    let (_, resid, _) = stationarity(&state, eq, opts.binding_tol);
    (state, max_iter, resid <= opts.stationarity_tol)
}

/// Log-barrier ascent for linear constraints; returns an approximate maximizer.
fn barrier<C: Criterion>(c: &C, data: &C::Data, from: &State, t: usize, eq: &[bool]) -> Result<DVector<f64>> {
    let q = eq.len();
    let ineq: Vec<usize> = (0..q).filter(|&j| !eq[j]).collect();
    let mut beta = from.beta.clone();
    if min_ineq_slack(&from.cv, eq) <= 0.0 {
        let def = c.default_start(data);
        let cv = constraint_values(&def, c.constraints(), t);
        if min_ineq_slack(&cv, eq) <= 0.0 || feasibility_violation(&cv, eq) > 1e-10 {
            return Err(IndiiError::Infeasible("no strictly feasible interior point for the barrier".into()));
        }
        beta = &beta * 0.999 + def * 0.001;
    }
    let phi = |b: &DVector<f64>, mu: f64| -> Option<(f64, CriterionEval, ConstraintValues)> {
        let ev = c.evaluate(b, data).ok().filter(|e| e.is_finite())?;
        let cv = constraint_values(b, c.constraints(), t);
        let mut v = ev.value;
        for &j in &ineq {
            if cv.slack[j] <= 0.0 {
                return None;
            }
            v += mu * cv.slack[j].ln();
        }
        Some((v, ev, cv))
    };
    let mut mu = 1e-2;
    while mu > 1e-13 {
        for _ in 0..60 {
            let (v0, ev, cv) = phi(&beta, mu).ok_or_else(|| IndiiError::Domain("barrier left the domain".into()))?;
            let mut grad = ev.score.clone();
            let mut hess = ev.hessian.clone();
            for &j in &ineq {
                let gj = cv.jacobian.row(j).transpose();
                grad += &gj * (mu / cv.slack[j]);
                hess -= &gj * gj.transpose() * (mu / (cv.slack[j] * cv.slack[j]));
            }
            let dsc = diag_scaling(&hess);
            let bs = negative_definite(&scale_sym(&hess, &dsc));
            let ss = grad.component_mul(&dsc);
            let eq_rows: Vec<usize> = (0..q).filter(|&j| eq[j]).collect();
            let ge = DMatrix::from_fn(eq_rows.len(), dsc.len(), |i, k| cv.jacobian[(eq_rows[i], k)] * dsc[k]);
            let re = DVector::from_iterator(eq_rows.len(), eq_rows.iter().map(|&j| -cv.slack[j]));
            let flags = vec![true; eq_rows.len()];
            let z = solve_qp(&QpProblem { b: &bs, s: &ss, g: &ge, r: &re, equality: &flags })?.d;
            let p = z.component_mul(&dsc);
            if z.amax() < 1e-11 {
                break;
            }
            let mut amax: f64 = 1.0;
            for &j in &ineq {
                let gp = cv.jacobian.row(j).dot(&p.transpose());
                if gp < 0.0 {
                    amax = amax.min(0.99 * cv.slack[j] / -gp);
                }
            }
            let pred = grad.dot(&p);
            let mut alpha = amax;
            let mut moved = false;
            for _ in 0..50 {
                let cand = &beta + &p * alpha;
                if let Some((v, _, _)) = phi(&cand, mu) {
                    if v >= v0 + 1e-4 * alpha * pred {
                        beta = cand;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        mu *= 0.1;
    }
    Ok(beta)
}

#[allow(clippy::too_many_arguments)]
fn finalize<C: Criterion>(
    c: &C,
    data: &C::Data,
    mut state: State,
    t: usize,
    eq: &[bool],
    opts: &FitOptions,
    iterations: usize,
    method: FitMethod,
) -> ConstrainedFit {
    // put near-binding linear constraints exactly on the boundary
    let binding = binding_set(&state.cv, eq, opts.binding_tol);
    let spec = c.constraints();
    let off: Vec<usize> = binding.iter().copied().filter(|&j| state.cv.slack[j] != 0.0).collect();
    if !off.is_empty() && off.iter().all(|&j| spec.constraints[j].is_linear()) {
        let ga = DMatrix::from_fn(off.len(), state.beta.len(), |r, k| state.cv.jacobian[(off[r], k)]);
        let sa = DVector::from_iterator(off.len(), off.iter().map(|&j| state.cv.slack[j]));
        if let Some(w) = (&ga * ga.transpose()).lu().solve(&sa) {
            let cand = &state.beta - ga.transpose() * w;
            if let Ok(st) = eval_state(c, data, cand, t) {
                if feasibility_violation(&st.cv, eq) <= 1e-12 {
                    state = st;
                }
            }
        }
    }
    let (lambda, resid, binding) = stationarity(&state, eq, opts.binding_tol);
    ConstrainedFit {
        q_value: state.eval.value,
        beta_r: state.beta,
        lambda,
        binding,
        eval: state.eval,
        slack: state.cv.slack,
        jacobian: state.cv.jacobian,
        equality: eq.to_vec(),
        converged: true,
        iterations,
        stationarity: resid,
        t,
        method,
    }
}
