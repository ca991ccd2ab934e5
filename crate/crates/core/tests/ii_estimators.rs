mod common;

use indii::aux::{BoundRule, ConstraintKind, ConstraintSpec, Constraint, Criterion, GarchCriterion, GaussianLocation, QuadraticCriterion};
use indii::constrained::{func_estimator, maximize_constrained};
use indii::ii::{
    asymptotic_variance, beta_tilde_c, beta_tilde_cfs, estimate, estimate_info_matrices, m_bar, m_cfs, newey_west, objective,
    optimal_weighting, IIConfig, ObservedAux, SimulatedCriterion, ThetaBounds, Variant,
};
use indii::rng::stream_rng;
use indii::sim::{draw_innovation_bank, BankPath, StructuralModel, SvModel, TimeSeries};
use indii::{IndiiError, Result};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

const DESIGN1: [f64; 3] = [-0.736, 0.90, 0.363];

fn sv_sample(t: usize, seed: u64) -> TimeSeries {
    let bank = draw_innovation_bank(1, t, 2, seed);
    SvModel.simulate(&DESIGN1, bank.path(0)).unwrap()
}

fn random_pd(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Round-off bound for solving with `h` and multiplying back: a few ulps times its condition number.
fn solve_roundoff(h: &DMatrix<f64>) -> f64 {
    let ev = h.clone().symmetric_eigenvalues();
    let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(l, u), v| (l.min(v.abs()), u.max(v.abs())));
    8.0 * f64::EPSILON * (hi / lo)
}

fn min_eig(m: &DMatrix<f64>) -> f64 {
    let s = (m + m.transpose()) * 0.5;
    s.symmetric_eigenvalues().min()
}

#[test]
fn m_bar_equals_hessian_times_wald_gap() {
    // phi >= .5 binds on design-one data, so the FUNC step is non-zero
    let crit = GarchCriterion::gaussian(BoundRule::constant(0.5));
    let y = sv_sample(400, 3);
    let obs = ObservedAux::new(&crit, &y).unwrap();
    assert!(!obs.fit.binding.is_empty());
    let sim = SimulatedCriterion::new(&SvModel, &crit, 3, 400, 17);
    for theta in [[-0.736, 0.9, 0.363], [-1.2, 0.8, 0.5], [-0.3, 0.95, 0.2]] {
        let m = m_bar(&theta, &obs, &sim).unwrap();
        let e = sim.evaluate(&theta, obs.beta_r()).unwrap();
        let bc = beta_tilde_c(&theta, &sim, &obs).unwrap();
        let rhs = &e.hessian * (obs.beta_hat() - bc);
        let scale = e.score.amax() + (&e.hessian * (obs.beta_hat() - obs.beta_r())).amax();
        assert!((&m - &rhs).amax() <= solve_roundoff(&e.hessian) * scale, "theta {theta:?}: {m} vs {rhs}");
    }
}

#[test]
fn zero_step_gives_score_matching() {
    let crit = GarchCriterion::default_gaussian();
    let y = sv_sample(500, 4);
    let obs = ObservedAux::new(&crit, &y).unwrap();
    assert!(obs.fit.binding.is_empty());
    let sim = SimulatedCriterion::new(&SvModel, &crit, 2, 500, 5);
    let theta = [-0.9, 0.88, 0.4];
    let e = sim.evaluate(&theta, obs.beta_r()).unwrap();
    let m = m_bar(&theta, &obs, &sim).unwrap();
    let step_term = (&e.hessian * (obs.beta_hat() - obs.beta_r())).amax();
    assert!((&m - &e.score).amax() <= step_term + 1e-12 * e.score.amax());
    // interior fit: observed score is the stationarity residual, so m_cfs is the simulated score up to it
    let mc = m_cfs(&theta, &obs, &sim).unwrap();
    assert!((&mc - &e.score - (-&obs.fit.eval.score)).amax() < 1e-12 * e.score.amax().max(1.0));
}

fn fixed_estimate(variant: Variant, w: Option<DMatrix<f64>>, y: &TimeSeries) -> indii::ii::IIEstimate {
    let crit = GarchCriterion::default_gaussian();
    let mut cfg = IIConfig::sv(99).with_variant(variant);
    cfg.h = 5;
    cfg.w = w;
    estimate(&cfg, &SvModel, &crit, y).unwrap()
}

#[test]
fn just_identified_estimate_ignores_weighting() {
    let y = sv_sample(1000, 8);
    let a = fixed_estimate(Variant::ScoreOurs, None, &y);
    let b = fixed_estimate(Variant::ScoreOurs, Some(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0, 1.0]))), &y);
    let c = fixed_estimate(Variant::WaldC, Some(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 5.0, 0.5]))), &y);
    for i in 0..3 {
        assert!((a.theta_hat[i] - b.theta_hat[i]).abs() < 1e-6, "{:?} vs {:?}", a.theta_hat, b.theta_hat);
        assert!((a.theta_hat[i] - c.theta_hat[i]).abs() < 1e-6, "{:?} vs {:?}", a.theta_hat, c.theta_hat);
    }
    assert!(a.objective < 1e-12 && c.objective < 1e-12);
}

#[test]
fn argmin_invariant_to_scaling_w() {
    let y = sv_sample(500, 12);
    let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0]));
    let a = fixed_estimate(Variant::ScoreOurs, Some(w.clone()), &y);
    let b = fixed_estimate(Variant::ScoreOurs, Some(w * 7.0), &y);
    for i in 0..3 {
        assert!((a.theta_hat[i] - b.theta_hat[i]).abs() < 1e-6);
    }
}

#[test]
fn estimates_are_bit_identical_across_runs_and_threads() {
    let y = sv_sample(500, 21);
    let a = fixed_estimate(Variant::ScoreOurs, None, &y);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| fixed_estimate(Variant::ScoreOurs, None, &y));
    assert_eq!(a.theta_hat, b.theta_hat);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
    assert_eq!(a.evaluations, b.evaluations);
}

/// `mu(theta) = B theta + e`, with the quadratic criterion centred at mu.
struct LinearMean {
    b: DMatrix<f64>,
    scale: f64,
}

impl StructuralModel for LinearMean {
    type Data = DVector<f64>;
    fn dim_theta(&self) -> usize {
        self.b.ncols()
    }
    fn bank_columns(&self) -> usize {
        self.b.nrows()
    }
    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim_theta() {
            return Err(IndiiError::Dimension("theta".into()));
        }
        Ok(())
    }
    fn simulate(&self, theta: &[f64], path: BankPath<'_>) -> Result<DVector<f64>> {
        let e = DVector::from_fn(self.b.nrows(), |i, _| path.get(0, i) * self.scale);
        Ok(&self.b * DVector::from_column_slice(theta) + e)
    }
    fn theta_names(&self) -> Vec<String> {
        (1..=self.dim_theta()).map(|i| format!("t{i}")).collect()
    }
}

#[test]
fn quadratic_beta_tilde_cfs_is_the_unconstrained_centre() {
    let mut rng = stream_rng(5, 0);
    let p = random_pd(&mut rng, 3);
    // beta_1 >= 0 and beta_1 + beta_2 <= 1
    let spec = ConstraintSpec::new(vec![
        Constraint::linear("b1 >= 0", ConstraintKind::Inequality, &[1.0, 0.0, 0.0], 0.0, BoundRule::ZERO),
        Constraint::linear("b1 + b2 <= 1", ConstraintKind::Inequality, &[-1.0, -1.0, 0.0], 1.0, BoundRule::ZERO),
    ]);
    let crit = QuadraticCriterion::new(p, spec);
    let model = LinearMean { b: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, -1.0]), scale: 0.1 };
    let observed = DVector::from_vec(vec![-0.4, 0.8, 0.3]);
    let obs = ObservedAux::new(&crit, &observed).unwrap();
    assert!(!obs.fit.binding.is_empty());
    let sim = SimulatedCriterion::new(&model, &crit, 4, 1, 31);
    for theta in [[-0.5, 0.3], [-1.0, 2.0], [0.2, 0.1]] {
        let paths = sim.simulate(&theta).unwrap();
        let centre = paths.iter().fold(DVector::zeros(3), |a, m| a + m) / paths.len() as f64;
        let fit = sim.fit(&theta, obs.beta_r()).unwrap();
        let func = func_estimator(&fit).unwrap();
        let cfs = beta_tilde_cfs(&theta, &sim, &obs).unwrap();
        assert!((&cfs - &centre).amax() < 1e-10, "theta {theta:?}: {cfs} vs {centre}");
        assert!((&cfs - &func.beta_hat).amax() < 1e-10);
        // well-conditioned Hessian: the m_bar identity holds to 1e-12
        let m = m_bar(&theta, &obs, &sim).unwrap();
        let bc = beta_tilde_c(&theta, &sim, &obs).unwrap();
        let rhs = &sim.evaluate(&theta, obs.beta_r()).unwrap().hessian * (obs.beta_hat() - bc);
        assert!((&m - &rhs).amax() < 1e-12);
    }
}

#[test]
fn optimal_weighting_special_cases() {
    let mut rng = stream_rng(8, 0);
    let j = random_pd(&mut rng, 4);
    assert!(max_abs(&(optimal_weighting(&j, &j).unwrap() - &j)) < 1e-12 * max_abs(&j));
    let half = optimal_weighting(&(&j * 2.0), &j).unwrap();
    assert!(max_abs(&(half - &j * 0.5)) < 1e-12 * max_abs(&j));
    let i = random_pd(&mut rng, 4);
    let w = optimal_weighting(&i, &j).unwrap();
    let direct = &j * i.clone().try_inverse().unwrap() * &j;
    assert!(max_abs(&(&w - direct)) < 1e-12 * max_abs(&w));
    assert!(min_eig(&w) > 0.0);
    assert!(optimal_weighting(&(-&i), &j).is_err());
}

#[test]
fn sandwich_variance_algebra() {
    let mut rng = stream_rng(9, 0);
    for _ in 0..20 {
        let i0 = random_pd(&mut rng, 4);
        let j0 = random_pd(&mut rng, 4);
        let db = DMatrix::from_fn(4, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        // binding-function form dL/dtheta' = J0 db/dtheta'
        let d = &j0 * &db;
        let wstar = optimal_weighting(&i0, &j0).unwrap();
        let v = asymptotic_variance(&d, &i0, &j0, &wstar, 10).unwrap();
        assert!(max_abs(&(&v.omega - &v.omega_star)) < 1e-10 * max_abs(&v.omega_star));
        let bform = (db.transpose() * &j0 * i0.clone().try_inverse().unwrap() * &j0 * &db).try_inverse().unwrap() * 1.1;
        assert!(max_abs(&(&v.omega_star - bform)) < 1e-10 * max_abs(&v.omega_star));
        let w = random_pd(&mut rng, 4);
        let vw = asymptotic_variance(&d, &i0, &j0, &w, 10).unwrap();
        assert!(min_eig(&(&vw.omega - &vw.omega_star)) > -1e-10 * max_abs(&vw.omega));
        let big = asymptotic_variance(&d, &i0, &j0, &w, 1_000_000).unwrap();
        assert!((big.factor - 1.0).abs() < 1.1e-6);
    }
    let i0 = DMatrix::identity(3, 3);
    let d = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
    match asymptotic_variance(&d, &i0, &i0, &i0, 1) {
        Err(IndiiError::RankDeficient(cols)) => assert_eq!(cols, vec![1]),
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn newey_west_matches_direct_sum() {
    let mut rng = stream_rng(10, 0);
    let t = 200;
    let s = DMatrix::from_fn(t, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
    let outer = s.transpose() * &s / t as f64;
    assert!(max_abs(&(newey_west(&s, 0) - &outer)) < 1e-14);
    let l = 3;
    let mut direct = outer.clone();
    for k in 1..=l {
        let wk = 1.0 - k as f64 / (l as f64 + 1.0);
        let mut g = DMatrix::zeros(2, 2);
        for i in k..t {
            g += s.row(i).transpose() * s.row(i - k);
        }
        g /= t as f64;
        direct += (&g + g.transpose()) * wk;
    }
    assert!(max_abs(&(newey_west(&s, l) - direct)) < 1e-13);
}

#[test]
fn info_matrices_for_gaussian_location() {
    let mut rng = stream_rng(11, 0);
    let y = TimeSeries::new((0..2000).map(|_| 1.0 + 2.0 * rng.sample::<f64, _>(StandardNormal)).collect()).unwrap();
    let crit = GaussianLocation::default();
    let fit = maximize_constrained(&crit, &y, &crit.default_start(&y)).unwrap();
    let info = estimate_info_matrices(&crit, &y, &fit).unwrap();
    assert!((info.j_hat[(0, 0)] - 1.0).abs() < 1e-12);
    let mean = y.values.iter().sum::<f64>() / 2000.0;
    let var = y.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 2000.0;
    // Bartlett lags add sampling noise of order bandwidth/sqrt(T)
    assert!((info.i_hat[(0, 0)] - var).abs() < 0.1 * var, "{} vs {var}", info.i_hat[(0, 0)]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn objectives_are_nonnegative(a in -2.5f64..0.5, d in 0.3f64..0.98, s in 0.05f64..1.0, v in 0usize..4) {
        let crit = GarchCriterion::default_gaussian();
        let y = sv_sample(300, 77);
        let obs = ObservedAux::new(&crit, &y).unwrap();
        let sim = SimulatedCriterion::new(&SvModel, &crit, 2, 300, 78);
        let variant = [Variant::ScoreOurs, Variant::ScoreCfs, Variant::WaldC, Variant::WaldCfs][v];
        let w = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5]));
        if let Ok((val, _)) = objective(variant, &[a, d, s], &obs, &sim, &w) {
            prop_assert!(val >= 0.0);
        }
    }

    #[test]
    fn eq23_identity_holds_everywhere(a in -2.5f64..0.5, d in 0.3f64..0.98, s in 0.05f64..1.0, seed in 0u64..1000) {
        let crit = GarchCriterion::gaussian(BoundRule::constant(0.4));
        let y = sv_sample(300, seed);
        let obs = ObservedAux::new(&crit, &y).unwrap();
        let sim = SimulatedCriterion::new(&SvModel, &crit, 2, 300, seed + 1);
        let th = [a, d, s];
        if let (Ok(m), Ok(bc), Ok(e)) = (m_bar(&th, &obs, &sim), beta_tilde_c(&th, &sim, &obs), sim.evaluate(&th, obs.beta_r())) {
            let rhs = &e.hessian * (obs.beta_hat() - bc);
            let scale = e.score.amax() + (&e.hessian * (obs.beta_hat() - obs.beta_r())).amax();
            prop_assert!((&m - &rhs).amax() <= solve_roundoff(&e.hessian) * scale);
        }
    }

    #[test]
    fn grid_bounds_contain_estimates(seed in 0u64..50) {
        let bounds = ThetaBounds::sv_default();
        let y = sv_sample(300, 1000 + seed);
        let crit = GarchCriterion::default_gaussian();
        let mut cfg = IIConfig::sv(seed);
        cfg.h = 2;
        cfg.grid.points = 5;
        if let Ok(est) = estimate(&cfg, &SvModel, &crit, &y) {
            prop_assert!(bounds.contains(&est.theta_hat));
            prop_assert!(est.objective >= 0.0);
        }
    }
}
