#![allow(dead_code)]
//! Independent oracles shared by the integration tests.

use indii::aux::{garch_gaussian_eval, garch_student_eval, probit_constrained_eval, Beta2Curvature, BoundRule, Constraint, ConstraintKind, ConstraintSpec, QuadraticCriterion};
use indii::sim::{default_covariates, draw_innovation_bank, simulate_probit, simulate_sv, ProbitParams, SvParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, rel: f64, floor: f64) -> DVector<f64> {
    DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| {
            let h = rel * x[i].abs().max(floor);
            let mut a = x.clone();
            let mut b = x.clone();
            a[i] += h;
            b[i] -= h;
            (f(&a) - f(&b)) / (2.0 * h)
        }),
    )
}

/// Central finite-difference Jacobian of a vector function (rows = outputs).
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, rel: f64, floor: f64) -> DMatrix<f64> {
    let n = x.len();
    let m = f(x).len();
    let mut j = DMatrix::zeros(m, n);
    for i in 0..n {
        let h = rel * x[i].abs().max(floor);
        let mut a = x.clone();
        let mut b = x.clone();
        a[i] += h;
        b[i] -= h;
        let d = (f(&a) - f(&b)) / (2.0 * h);
        j.set_column(i, &d);
    }
    j
}

/// Max of |a - b| / (|b| + floor/rel) style comparison: returns the worst ratio
/// `|a_i - b_i| / (rel |b_i| + abs)`; the check passes when the result is <= 1.
pub fn worst_ratio(a: &[f64], b: &[f64], rel: f64, abs: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / (rel * y.abs() + abs)).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Dynamic-probit likelihood by a forward filter in the latent error, using
// Gauss-Legendre quadrature on each period's truncation interval.

fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (mut q0, mut q1) = (1.0, 0.0);
                for j in 0..n {
                    let q2 = q1;
                    q1 = q0;
                    q0 = ((2 * j + 1) as f64 * z * q1 - j as f64 * q2) / (j + 1) as f64;
                }
                let dq = n as f64 * (z * q0 - q1) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                break;
            }
        }
    }
    (x, w)
}

fn npdf(x: f64, var: f64) -> f64 {
    (-0.5 * x * x / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// `log P(y_1..y_T)` for `y_t = 1[x_t' b1 + u_t > 0]`, `u_t = rho u_{t-1} + nu_t`, stationary start.
pub fn probit_loglik_filter(b1: &[f64], rho: f64, y: &[u8], x: &DMatrix<f64>) -> f64 {
    let n_nodes = 80;
    let lim = 12.0;
    let (gx, gw) = gauss_legendre(n_nodes);
    let m: Vec<f64> = (0..y.len()).map(|t| (0..b1.len()).map(|j| x[(t, j)] * b1[j]).sum()).collect();
    let nodes = |t: usize| -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = if y[t] == 1 { (-m[t], lim) } else { (-lim, -m[t]) };
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        (gx.iter().map(|z| mid + half * z).collect(), gw.iter().map(|w| w * half).collect())
    };
    let (mut u, mut w) = nodes(0);
    let v0 = 1.0 / (1.0 - rho * rho);
    let mut f: Vec<f64> = u.iter().map(|&ui| npdf(ui, v0)).collect();
    let mut log_scale = 0.0;
    for t in 1..y.len() {
        let (un, wn) = nodes(t);
        let fnew: Vec<f64> = un
            .iter()
            .map(|&ui| u.iter().zip(&w).zip(&f).map(|((&up, &wp), &fp)| wp * fp * npdf(ui - rho * up, 1.0)).sum())
            .collect();
        let total: f64 = fnew.iter().zip(&wn).map(|(a, b)| a * b).sum();
        log_scale += total.ln();
        f = fnew.iter().map(|v| v / total).collect();
        u = un;
        w = wn;
    }
    let last: f64 = f.iter().zip(&w).map(|(a, b)| a * b).sum();
    log_scale + last.ln()
}

// ---------------------------------------------------------------------------
// Brute-force QP oracle: enumerate every active set.

/// Maximize `s'd + d'Bd/2` s.t. `G d >= r` (rows flagged `eq` hold with equality).
/// Returns the best feasible, dual-feasible KKT point over all active sets.
pub fn qp_enumerate(b: &DMatrix<f64>, s: &DVector<f64>, g: &DMatrix<f64>, r: &DVector<f64>, eq: &[bool]) -> Option<DVector<f64>> {
    let n = s.len();
    let q = r.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << q) {
        if (0..q).any(|i| eq[i] && mask & (1 << i) == 0) {
            continue;
        }
        let act: Vec<usize> = (0..q).filter(|i| mask & (1 << i) != 0).collect();
        let m = act.len();
        let mut k = DMatrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(b);
        let mut rhs = DVector::zeros(n + m);
        rhs.rows_mut(0, n).copy_from(&(-s));
        for (a, &i) in act.iter().enumerate() {
            for j in 0..n {
                k[(n + a, j)] = g[(i, j)];
                k[(j, n + a)] = g[(i, j)];
            }
            rhs[n + a] = r[i];
        }
        let Some(sol) = k.lu().solve(&rhs) else { continue };
        let d = sol.rows(0, n).into_owned();
        // s + B d + G' mu = 0  with  K [d; -mu] ... the KKT solve gives sol = [d; nu] with B d + G'nu = -s
        let nu = sol.rows(n, m).into_owned();
        let feasible = (0..q).all(|i| (g.row(i) * &d)[0] >= r[i] - 1e-9);
        let dual = act.iter().enumerate().all(|(a, &i)| eq[i] || nu[a] >= -1e-9);
        if feasible && dual {
            let val = s.dot(&d) + 0.5 * d.dot(&(b * &d));
            if best.as_ref().map_or(true, |(v, _)| val > *v + 1e-12) {
                best = Some((val, d));
            }
        }
    }
    best.map(|(_, d)| d)
}

/// Random concave quadratic with up to four linear constraints, some of them equalities.
pub struct RandomQp {
    pub crit: QuadraticCriterion,
    pub mu: DVector<f64>,
    pub g: DMatrix<f64>,
    pub r: DVector<f64>,
    pub eq: Vec<bool>,
}

pub fn random_qp(seed: u64) -> RandomQp {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = rng.gen_range(1..=4usize);
    let q = rng.gen_range(0..=4usize);
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let p = &a * a.transpose() + DMatrix::identity(d, d) * 0.1;
    let mu = DVector::from_fn(d, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
    let mut cons = Vec::new();
    let mut g = DMatrix::zeros(q, d);
    let mut r = DVector::zeros(q);
    let mut eq = Vec::new();
    let mut n_eq = 0;
    for j in 0..q {
        let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let is_eq = n_eq + 1 < d && rng.gen_bool(0.15);
        let off = if is_eq { 0.0 } else { rng.gen_range(0.05..1.5) };
        if is_eq {
            n_eq += 1;
        }
        let kind = if is_eq { ConstraintKind::Equality } else { ConstraintKind::Inequality };
        cons.push(Constraint::linear(&format!("c{j}"), kind, &w, off, BoundRule::ZERO));
        g.set_row(j, &DVector::from_vec(w).transpose());
        r[j] = -off;
        eq.push(is_eq);
    }
    RandomQp { crit: QuadraticCriterion::new(p, ConstraintSpec::new(cons)), mu, g, r, eq }
}

pub fn sv_data(t: usize, seed: u64) -> Vec<f64> {
    let bank = draw_innovation_bank(1, t, 2, seed);
    simulate_sv(&SvParams::new(-0.736, 0.9, 0.363).unwrap(), bank.path(0)).unwrap().values
}

fn random_garch(rng: &mut impl Rng, m: f64, student: bool) -> DVector<f64> {
    let phi = rng.gen_range(0.02..0.3);
    let pi = rng.gen_range(0.3..(0.97 - phi));
    let psi = m * rng.gen_range(0.02..0.5);
    let mut v = vec![psi, phi, pi];
    if student {
        v.push(rng.gen_range(0.02..0.45));
    }
    DVector::from_vec(v)
}

/// Worst score and Hessian ratios (`worst_ratio` at 1e-6 / 1e-5) of a GARCH
/// criterion against central differences at 100 random interior points.
pub fn garch_fd_ratios(student: bool) -> (f64, f64) {
    let y = sv_data(500, 11);
    let m = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(if student { 2 } else { 1 });
    let eval = |b: &DVector<f64>| {
        if student {
            garch_student_eval(b.as_slice(), &y).unwrap()
        } else {
            garch_gaussian_eval(b.as_slice(), &y).unwrap()
        }
    };
    let (mut ws, mut wh) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let b = random_garch(&mut rng, m, student);
        let e = eval(&b);
        let g = fd_gradient(|x| eval(x).value, &b, 1e-5, 1e-3);
        ws = ws.max(worst_ratio(e.score.as_slice(), g.as_slice(), 1e-6, 1e-8));
        let h = fd_jacobian(|x| eval(x).score, &b, 1e-5, 1e-3);
        wh = wh.max(worst_ratio(e.hessian.as_slice(), h.as_slice(), 1e-5, 1e-8));
        assert!((&e.hessian - e.hessian.transpose()).amax() < 1e-10);
    }
    (ws, wh)
}

pub fn probit_sample(t: usize, rho: f64, seed: u64) -> (Vec<u8>, DMatrix<f64>) {
    let x = default_covariates(t, seed + 100);
    let bank = draw_innovation_bank(1, t, 1, seed);
    let s = simulate_probit(&ProbitParams::new(vec![0.3, 0.8], rho).unwrap(), &x, bank.path(0)).unwrap();
    (s.y, x)
}

/// Same check for the constrained probit criterion: score in beta1 and the
/// derivative of the full score in beta1, at 100 random points.
pub fn probit_fd_ratios() -> (f64, f64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let (mut ws, mut wh) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let (y, x) = probit_sample(200, 0.0, k);
        let b = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.5..1.5)]);
        let f = |v: &DVector<f64>| probit_constrained_eval(v.as_slice(), &y, &x, Beta2Curvature::Exact).unwrap();
        let e = f(&b);
        let g = fd_gradient(|v| f(v).value, &b, 1e-5, 1e-2);
        ws = ws.max(worst_ratio(&e.score.as_slice()[..2], g.as_slice(), 1e-6, 1e-8));
        let j = fd_jacobian(|v| f(v).score, &b, 1e-5, 1e-2);
        let an = e.hessian.columns(0, 2).into_owned();
        wh = wh.max(worst_ratio(an.as_slice(), j.as_slice(), 1e-5, 1e-8));
    }
    (ws, wh)
}
