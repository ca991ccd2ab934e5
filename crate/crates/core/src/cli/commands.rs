use super::config::Settings;
use super::io::{fmt, write_csv, write_json, Table, SCHEMA_VERSION};
use super::{AuxArgs, CliError, Command, DensityArgs, EstimateArgs, MonteCarloArgs, OveridArgs, SimulateArgs};
use crate::aux::{
    constraint_values, default_eta_gap, garch_spec, garch_t_spec, BoundRule, ConstraintFile, Criterion, GarchCriterion, GarchDensity,
    ProbitCriterion, ProbitData,
};
use crate::constrained::{func_estimator, maximize_constrained, score_test, ConstrainedFit, FuncEstimate};
use crate::ii::{estimate, IIConfig, IIEstimate, ThetaBounds, Variant};
use crate::mc::{kernel_density, run_design, write_outputs, CriterionId, DesignKind, McDesign};
use crate::overid::{monte_carlo_variance, naive_optimal_a, optimal_a_for_theta, MomentSystem, SelectionMatrix};
use crate::rng::{derive_seed, purpose, stream_rng};
use crate::sim::{draw_innovation_bank, probit_covariates, ProbitModel, StructuralModel, SvModel, TimeSeries};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub fn run(cmd: Command, mut s: Settings) -> Result<(), CliError> {
    match cmd {
        Command::Simulate(a) => simulate(a, &mut s),
        Command::FitAux(a) => aux_command(a, &mut s, AuxMode::Fit),
        Command::Func(a) => aux_command(a, &mut s, AuxMode::Func),
        Command::ScoreTest(a) => aux_command(a, &mut s, AuxMode::ScoreTest),
        Command::Estimate(a) => estimate_cmd(a, &mut s),
        Command::Overid(a) => overid(a, &mut s),
        Command::Montecarlo(a) => montecarlo(a, &mut s),
        Command::Density(a) => density(a, &mut s),
    }
}

fn existing(s: &mut Settings, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>, CliError> {
    let p: Option<PathBuf> = s.get(key, flag)?;
    match p {
        Some(p) if !p.is_file() => Err(CliError::usage(format!("--{key}: {} does not exist", p.display()))),
        p => Ok(p),
    }
}

fn required_file(s: &mut Settings, key: &str, flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    existing(s, key, flag)?.ok_or_else(|| CliError::usage(format!("missing required option --{key}")))
}

/// Echo next to a file output, or to stderr when writing to stdout.
fn echo(s: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".config.toml");
            s.write_echo(Path::new(&name))
        }
        None => {
            eprint!("{}", s.to_toml());
            Ok(())
        }
    }
}

fn parse<T: std::str::FromStr<Err = crate::IndiiError>>(v: &str) -> Result<T, CliError> {
    v.parse::<T>().map_err(|e| CliError::usage(e.to_string()))
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.as_slice())
}

fn mat_json(m: &DMatrix<f64>) -> Value {
    Value::Array((0..m.nrows()).map(|i| json!(m.row(i).iter().copied().collect::<Vec<_>>())).collect())
}

fn simulate(a: SimulateArgs, s: &mut Settings) -> Result<(), CliError> {
    let model: String = s.require("model", a.model)?;
    let theta = s.numbers("theta", a.theta.as_deref())?.ok_or_else(|| CliError::usage("missing required option --theta"))?;
    let t: usize = s.require("T", a.t)?;
    let h: usize = s.or("H", a.h, 1)?;
    let seed: u64 = s.require("seed", a.seed)?;
    let out: Option<PathBuf> = s.get("out", a.out)?;
    if t == 0 || h == 0 {
        return Err(CliError::usage("T and H must be positive"));
    }
    let ys = |p: usize| if h == 1 { "y".to_string() } else { format!("y_{}", p + 1) };
    let data_seed = derive_seed(seed, &[0, purpose::DATA]);
    let (header, rows) = match model.as_str() {
        "sv" => {
            let m = SvModel;
            m.check_theta(&theta)?;
            let bank = draw_innovation_bank(h, t, m.bank_columns(), data_seed);
            let paths = (0..h).map(|p| m.simulate(&theta, bank.path(p))).collect::<crate::Result<Vec<TimeSeries>>>()?;
            let rows = (0..t).map(|i| paths.iter().map(|y| fmt(y.values[i])).collect()).collect::<Vec<Vec<String>>>();
            ((0..h).map(ys).collect::<Vec<_>>(), rows)
        }
        "probit" => {
            if theta.len() < 2 {
                return Err(CliError::usage("probit theta needs theta1 entries and theta2"));
            }
            let d1 = theta.len() - 1;
            let x = Arc::new(probit_covariates(t, d1, derive_seed(seed, &[purpose::COVARIATES]))?);
            let m = ProbitModel::new(Arc::clone(&x));
            m.check_theta(&theta)?;
            let bank = draw_innovation_bank(h, t, m.bank_columns(), data_seed);
            let paths = (0..h).map(|p| m.simulate(&theta, bank.path(p))).collect::<crate::Result<Vec<ProbitData>>>()?;
            let mut header: Vec<String> = (0..h).map(ys).collect();
            header.extend((1..=d1).map(|j| format!("x_{j}")));
            let rows = (0..t)
                .map(|i| {
                    let mut r: Vec<String> = paths.iter().map(|p| p.y[i].to_string()).collect();
                    r.extend((0..d1).map(|j| fmt(x[(i, j)])));
                    r
                })
                .collect();
            (header, rows)
        }
        other => return Err(CliError::usage(format!("unknown model '{other}' (sv | probit)"))),
    };
    write_csv(out.as_deref(), &header, &rows)?;
    echo(s, out.as_deref())
}

enum Problem {
    Sv(GarchCriterion, TimeSeries),
    Probit(ProbitCriterion, ProbitData),
}

fn problem(a: AuxArgs, s: &mut Settings, default: Option<&str>) -> Result<(Problem, Option<PathBuf>), CliError> {
    let crit: String = match default {
        Some(d) => s.or("criterion", a.criterion, d.to_string())?,
        None => s.require("criterion", a.criterion)?,
    };
    let crit: CriterionId = parse(&crit)?;
    let data = required_file(s, "data", a.data)?;
    let column: Option<String> = s.get("column", a.column)?;
    let spec = existing(s, "spec", a.spec)?;
    let out: Option<PathBuf> = s.get("out", a.out)?;
    let table = Table::read(&data)?;
    let p = match crit {
        CriterionId::Garch | CriterionId::GarchT => {
            let y = table.series(column.as_deref())?;
            let c = s.or("phi_c", a.phi_c, 0.1)?;
            let kappa = s.or("phi_kappa", a.phi_kappa, 0.49)?;
            let phi = BoundRule { c, kappa };
            let student = crit == CriterionId::GarchT;
            let density = if student { GarchDensity::Student } else { GarchDensity::Gaussian };
            let cs = match &spec {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
                    ConstraintFile::parse(&text)?.into_spec(if student { 4 } else { 3 })?
                }
                None if student => garch_t_spec(phi, default_eta_gap()),
                None => garch_spec(phi),
            };
            Problem::Sv(GarchCriterion::with_spec(density, cs), y)
        }
        CriterionId::Probit0 => {
            if spec.is_some() {
                return Err(CliError::usage("--spec applies to the GARCH criteria only"));
            }
            let d = table.probit(column.as_deref())?;
            Problem::Probit(ProbitCriterion::new(d.x.ncols()), d)
        }
    };
    Ok((p, out))
}

#[derive(Clone, Copy, PartialEq)]
enum AuxMode {
    Fit,
    Func,
    ScoreTest,
}

fn fit_json<C: Criterion>(crit: &C, data: &C::Data, fit: &ConstrainedFit) -> Map<String, Value> {
    let labels = crit.constraints().labels();
    let constraints: Vec<Value> = labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            json!({
                "label": l,
                "equality": fit.equality[j],
                "binding": fit.is_binding(j),
                "lambda": fit.lambda[j],
                "slack": fit.slack[j],
            })
        })
        .collect();
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("criterion".into(), json!(crit.name()));
    m.insert("T".into(), json!(crit.sample_size(data)));
    m.insert("param_names".into(), json!(crit.param_names()));
    m.insert("beta_r".into(), vec_json(&fit.beta_r));
    m.insert("lambda".into(), vec_json(&fit.lambda));
    m.insert("binding".into(), json!(fit.binding.iter().map(|&j| labels[j].clone()).collect::<Vec<_>>()));
    m.insert("constraints".into(), json!(constraints));
    m.insert("q_value".into(), json!(fit.q_value));
    m.insert("converged".into(), json!(fit.converged));
    m.insert("iterations".into(), json!(fit.iterations));
    m.insert("stationarity".into(), json!(fit.stationarity));
    m.insert("method".into(), json!(fit.method));
    m
}

fn func_json<C: Criterion>(crit: &C, data: &C::Data, f: &FuncEstimate, m: &mut Map<String, Value>) {
    let t = crit.sample_size(data);
    let after = constraint_values(&f.beta_hat, crit.constraints(), t);
    let violations: Vec<String> = crit
        .constraints()
        .labels()
        .into_iter()
        .enumerate()
        .filter(|&(j, _)| !crit.constraints().is_equality(j) && after.slack[j] < crate::mc::VIOLATION_TOL)
        .map(|(_, l)| l)
        .collect();
    m.insert("beta_hat".into(), vec_json(&f.beta_hat));
    m.insert("step".into(), vec_json(&f.step));
    m.insert("ridge".into(), json!(f.ridge));
    m.insert("violations".into(), json!(violations));
}

fn aux_report<C: Criterion>(crit: &C, data: &C::Data, mode: AuxMode) -> Result<Value, CliError> {
    let fit = maximize_constrained(crit, data, &crit.default_start(data))?.require_converged()?;
    let mut m = fit_json(crit, data, &fit);
    if mode == AuxMode::Fit {
        return Ok(Value::Object(m));
    }
    let f = func_estimator(&fit)?;
    func_json(crit, data, &f, &mut m);
    let q = crit.constraints().equality_count();
    if mode == AuxMode::ScoreTest && q == 0 {
        return Err(CliError::usage(format!("criterion {} has no equality constraints to test", crit.name())));
    }
    if q > 0 {
        let st = score_test(&fit, &f, crit.sample_size(data), q)?;
        m.insert("score_test".into(), json!({ "xi": st.xi, "df": st.df, "p_value": st.p_value, "reject_5pct": st.p_value < 0.05 }));
    }
    Ok(Value::Object(m))
}

fn aux_command(a: AuxArgs, s: &mut Settings, mode: AuxMode) -> Result<(), CliError> {
    let default = (mode == AuxMode::ScoreTest).then_some("probit0");
    let (p, out) = problem(a, s, default)?;
    let v = match &p {
        Problem::Sv(c, d) => aux_report(c, d, mode)?,
        Problem::Probit(c, d) => aux_report(c, d, mode)?,
    };
    write_json(out.as_deref(), &v)?;
    echo(s, out.as_deref())
}

fn estimate_json(est: &IIEstimate, names: &[String], t: usize, labels: &[String], h: usize, seed: u64) -> Value {
    let (omega, omega_star, se) = match &est.omega_hat {
        Some(v) => (
            mat_json(&v.omega),
            mat_json(&v.omega_star),
            json!((0..v.omega.nrows()).map(|i| (v.omega[(i, i)] / t as f64).sqrt()).collect::<Vec<_>>()),
        ),
        None => (Value::Null, Value::Null, Value::Null),
    };
    json!({
        "schema_version": SCHEMA_VERSION,
        "variant": est.variant.as_str(),
        "theta_names": names,
        "theta_hat": est.theta_hat,
        "objective": est.objective,
        "omega": omega,
        "omega_star": omega_star,
        "standard_errors": se,
        "diagnostics": {
            "T": t,
            "H": h,
            "seed": seed,
            "on_boundary": est.on_boundary,
            "grid_resolution": est.resolution,
            "evaluations": est.evaluations,
            "moments": vec_json(&est.moments),
            "variance_error": est.variance_error,
            "beta_r": vec_json(&est.beta_r),
            "beta_hat": vec_json(&est.beta_hat),
            "lambda": vec_json(&est.lambda),
            "binding": est.binding.iter().map(|&j| labels[j].clone()).collect::<Vec<_>>(),
        },
    })
}

fn estimate_cmd(a: EstimateArgs, s: &mut Settings) -> Result<(), CliError> {
    let variant: String = s.or("variant", a.variant, Variant::ScoreOurs.as_str().to_string())?;
    let variant: Variant = parse(&variant)?;
    let h: usize = s.or("H", a.h, 10)?;
    let seed: u64 = s.require("seed", a.seed)?;
    let w_path = existing(s, "W", a.w)?;
    let no_variance: bool = s.or("no_variance", a.no_variance.then_some(true), false)?;
    let (p, out) = problem(a.aux, s, None)?;
    let w = w_path.map(|p| Table::read(&p).map(|t| t.matrix())).transpose()?;
    let config = |bounds: ThetaBounds| {
        let mut c = IIConfig::new(bounds, seed).with_variant(variant);
        c.h = h;
        c.w = w.clone();
        c.compute_variance = !no_variance;
        c
    };
    let v = match &p {
        Problem::Sv(c, d) => {
            let est = estimate(&config(ThetaBounds::sv_default()), &SvModel, c, d)?;
            estimate_json(&est, &SvModel.theta_names(), d.len(), &c.constraints().labels(), h, seed)
        }
        Problem::Probit(c, d) => {
            let model = ProbitModel::new(Arc::clone(&d.x));
            let est = estimate(&config(ThetaBounds::probit_default(d.x.ncols())), &model, c, d)?;
            estimate_json(&est, &model.theta_names(), d.y.len(), &c.constraints().labels(), h, seed)
        }
    };
    write_json(out.as_deref(), &v)?;
    echo(s, out.as_deref())
}

/// The naive `Gamma' V^-1` selection and the optimal one with a random admissible complement.
fn selections(system: &MomentSystem, seed: u64, names: &[String]) -> Result<Vec<(String, SelectionMatrix)>, CliError> {
    let mut out = Vec::new();
    for n in names {
        let a = match n.as_str() {
            "naive" => naive_optimal_a(&system.gamma, &system.v)?,
            "optimal" => {
                let extra = system.d_beta() - system.d_theta();
                let mut rng = stream_rng(derive_seed(seed, &[purpose::OVERID, 1]), 0);
                let c = DMatrix::from_fn(system.q(), extra, |_, _| rng.sample::<f64, _>(StandardNormal));
                optimal_a_for_theta(&system.gamma_theta, &system.v, &c)?
            }
            other => return Err(CliError::usage(format!("unknown selection '{other}' (naive | optimal)"))),
        };
        out.push((n.clone(), a));
    }
    Ok(out)
}

fn overid(a: OveridArgs, s: &mut Settings) -> Result<(), CliError> {
    let instance: String = s.or("instance", a.instance, "linear".to_string())?;
    let compare = s.words("compare", a.compare.as_deref())?.unwrap_or_else(|| vec!["naive".into(), "optimal".into()]);
    let reps: usize = s.or("reps", a.reps, 500)?;
    let t: usize = s.or("T", a.t, 1000)?;
    let seed: u64 = s.require("seed", a.seed)?;
    let out: Option<PathBuf> = s.get("out", a.out)?;
    if reps < 2 || t == 0 {
        return Err(CliError::usage("need reps >= 2 and T >= 1"));
    }
    let system = MomentSystem::by_name(&instance, derive_seed(seed, &[purpose::OVERID]))?;
    let sel = selections(&system, seed, &compare)?;
    let mc = monte_carlo_variance(&system, &sel, reps, t, seed)?;
    let header: Vec<String> = ["selection", "quantity", "row", "col", "value"].iter().map(|h| h.to_string()).collect();
    let mut rows = Vec::new();
    for (k, name) in mc.names.iter().enumerate() {
        let mut push = |q: &str, m: &DMatrix<f64>| {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    rows.push(vec![name.clone(), q.to_string(), i.to_string(), j.to_string(), fmt(m[(i, j)])]);
                }
            }
        };
        if let Some(th) = &mc.theory[k] {
            push("asymptotic", th);
        }
        push("monte_carlo", &mc.scaled_variance[k]);
    }
    if mc.failures > 0 {
        log::warn!("{} of {reps} replications failed", mc.failures);
    }
    write_csv(out.as_deref(), &header, &rows)?;
    echo(s, out.as_deref())
}

fn montecarlo(a: MonteCarloArgs, s: &mut Settings) -> Result<(), CliError> {
    let design: String = s.require("design", a.design)?;
    let kind: DesignKind = parse(&design)?;
    let seed: u64 = s.require("seed", a.seed)?;
    let t: usize = s.or("T", a.t, 1000)?;
    let reps: usize = s.or("reps", a.reps, 1000)?;
    let out: PathBuf = s.require("out", a.out)?;
    let mut d = McDesign::preset(kind, t, reps, seed);
    d.h = s.or("H", a.h, d.h)?;
    if let Some(v) = s.words("variants", a.variants.as_deref())? {
        d.variants = v.iter().map(|v| parse::<Variant>(v)).collect::<Result<_, _>>()?;
    }
    d.phi_bound.c = s.or("phi_c", a.phi_c, d.phi_bound.c)?;
    d.phi_bound.kappa = s.or("phi_kappa", a.phi_kappa, d.phi_bound.kappa)?;
    if let Some(th) = s.numbers("theta", a.theta.as_deref())? {
        d.theta0 = th;
    }
    if s.or("no_ii", a.no_ii.then_some(true), false)? {
        d.run_ii = false;
    }
    if let Some(i) = s.get::<String>("instance", a.instance)? {
        d.instance = i;
    }
    std::fs::create_dir_all(&out).map_err(|e| CliError::usage(format!("{}: {e}", out.display())))?;
    s.write_echo(&out.join("config.toml"))?;
    let run = run_design(&d)?;
    let written = write_outputs(&run, &out)?;
    let sm = &run.summary;
    println!("{} T={} R={} failed={} ({:.1}s)", d.name, d.t, d.reps, sm.failed, sm.wall_seconds);
    for b in &sm.bindings {
        println!("  {:<16} binding {:5.1}%  FUNC-violation {:5.1}%", b.label, b.binding_pct, b.func_violation_pct);
    }
    for e in &sm.estimators {
        for p in &e.params {
            println!("  {:<14} {:<8} median {:9.4} std {:8.4} rmse {:8.4} bias {:8.4}", e.name, p.name, p.median, p.std, p.rmse, p.mean_bias);
        }
    }
    if let Some(st) = &sm.score_test {
        println!("  score test: rejection rate at 5% {:.1}%", 100.0 * st.rejection_rate_5pct);
    }
    for p in written {
        log::info!("wrote {}", p.display());
    }
    run.require_valid()?;
    Ok(())
}

fn density(a: DensityArgs, s: &mut Settings) -> Result<(), CliError> {
    let data = required_file(s, "data", a.data)?;
    let column: Option<String> = s.get("column", a.column)?;
    let bandwidth: Option<f64> = s.get("bandwidth", a.bandwidth)?;
    let trim: f64 = s.or("trim", a.trim, 0.015)?;
    let out: Option<PathBuf> = s.get("out", a.out)?;
    let table = Table::read(&data)?;
    let x = match column.as_deref() {
        Some(c) => table.column(c)?.to_vec(),
        None => table.columns.first().cloned().ok_or_else(|| CliError::usage("data file has no columns"))?,
    };
    let d = kernel_density(&x, bandwidth, trim)?;
    log::info!("bandwidth {} on {} observations", d.bandwidth, d.n);
    let header = vec!["x".to_string(), "density".to_string()];
    let rows: Vec<Vec<String>> = d.grid.iter().zip(&d.density).map(|(g, f)| vec![fmt(*g), fmt(*f)]).collect();
    write_csv(out.as_deref(), &header, &rows)?;
    echo(s, out.as_deref())
}
