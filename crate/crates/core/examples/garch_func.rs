//! Fit the constrained Gaussian GARCH(1,1) to simulated SV returns, take the
//! FUNC step and count how often the phi bound binds or is violated.
//!
//! cargo run --release --example garch_func -- [T] [reps]

use indii::aux::{Criterion, GarchCriterion};
use indii::constrained::{func_estimator, maximize_constrained};
use indii::rng::{derive_seed, purpose};
use indii::sim::{draw_innovation_bank, simulate_sv, SvParams};

fn main() -> indii::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let t = args.first().copied().unwrap_or(500);
    let reps = args.get(1).copied().unwrap_or(200);
    let theta = SvParams::new(-0.736, 0.90, 0.363)?;
    let crit = GarchCriterion::default_gaussian();
    let q = crit.constraints().len();
    let (mut bind, mut viol) = (vec![0usize; q], vec![0usize; q]);
    let mut failed = 0;
    for r in 0..reps {
        let bank = draw_innovation_bank(1, t, 2, derive_seed(2024, &[r as u64, purpose::DATA]));
        let y = simulate_sv(&theta, bank.path(0))?;
        let fit = match maximize_constrained(&crit, &y, &crit.default_start(&y)) {
            Ok(f) if f.converged => f,
            _ => {
                failed += 1;
                continue;
            }
        };
        let func = func_estimator(&fit)?;
        let after = indii::aux::constraint_values(&func.beta_hat, crit.constraints(), t);
        for j in 0..q {
            if fit.is_binding(j) {
                bind[j] += 1;
            }
            if after.slack[j] < 1e-8 {
                viol[j] += 1;
            }
        }
        if r == 0 {
            println!("first replication: beta_r = {:?}, lambda = {:?}", fit.beta_r.as_slice(), fit.lambda.as_slice());
            println!("                   FUNC    = {:?}", func.beta_hat.as_slice());
        }
    }
    let ok = (reps - failed) as f64;
    println!("T = {t}, {reps} replications, {failed} failures");
    for (j, label) in crit.constraints().labels().iter().enumerate() {
        println!(
            "{label:>14}: binding {:5.1}%  FUNC violates {:5.1}%",
            100.0 * bind[j] as f64 / ok,
            100.0 * viol[j] as f64 / ok
        );
    }
    Ok(())
}
