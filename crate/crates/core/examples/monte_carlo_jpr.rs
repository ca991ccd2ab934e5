//! Monte Carlo for the JPR stochastic-volatility designs: binding table of
//! the constrained GARCH fit and summary statistics of the score-based
//! I-I estimator, written to an output directory.
//!
//! cargo run --release --example monte_carlo_jpr -- [jpr1|jpr2] [T] [reps] [out_dir]

use indii::mc::{run_design, write_outputs, DesignKind, McDesign};
use std::path::PathBuf;

fn main() -> indii::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let kind: DesignKind = args.first().map(String::as_str).unwrap_or("jpr1").parse()?;
    let t = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let reps = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let out = PathBuf::from(args.get(3).cloned().unwrap_or_else(|| format!("target/mc_{kind}_{t}")));
    let design = McDesign::preset(kind, t, reps, 20240);
    let run = run_design(&design)?;
    let s = &run.summary;
    println!("{} T = {} R = {} ({} failed, {:.1}s)", s.design, s.t, s.reps, s.failed, s.wall_seconds);
    for b in &s.bindings {
        println!("  {:>14}: binding {:5.1}%  FUNC violates {:5.1}%", b.label, b.binding_pct, b.func_violation_pct);
    }
    for e in &s.estimators {
        println!("  {} ({} estimates, {:.1}% on the boundary)", e.name, e.n, e.boundary_pct);
        println!("    {:>8} {:>9} {:>9} {:>9} {:>9}", "", "median", "STD", "RMSE", "bias");
        for p in &e.params {
            println!("    {:>8} {:9.4} {:9.4} {:9.4} {:9.4}", p.name, p.median, p.std, p.rmse, p.mean_bias);
        }
    }
    for p in write_outputs(&run, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
