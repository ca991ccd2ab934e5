//! Score-based indirect inference for the SV model with a constrained
//! Gaussian GARCH(1,1) auxiliary model, compared with the Wald variant built
//! on one simulated Newton step.
//!
//! cargo run --release --example ii_estimate_sv -- [T] [seed]

use indii::aux::GarchCriterion;
use indii::ii::{estimate, IIConfig, Variant};
use indii::rng::{derive_seed, purpose};
use indii::sim::{draw_innovation_bank, simulate_sv, SvModel, SvParams};
use std::time::Instant;

fn main() -> indii::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let t = args.first().copied().unwrap_or(1000) as usize;
    let seed = args.get(1).copied().unwrap_or(11);
    let truth = SvParams::new(-0.736, 0.90, 0.363)?;
    let bank = draw_innovation_bank(1, t, 2, derive_seed(seed, &[purpose::DATA]));
    let y = simulate_sv(&truth, bank.path(0))?;
    let crit = GarchCriterion::default_gaussian();
    let model = SvModel;
    let mut config = IIConfig::sv(derive_seed(seed, &[purpose::SIM]));
    config.compute_variance = true;
    for variant in [Variant::ScoreOurs, Variant::WaldC] {
        let clock = Instant::now();
        let est = estimate(&config.clone().with_variant(variant), &model, &crit, &y)?;
        println!(
            "{variant:>10}: theta = {:?}  objective = {:.3e}  ({} evaluations, {:.1?})",
            est.theta_hat,
            est.objective,
            est.evaluations,
            clock.elapsed()
        );
        if let Some(v) = &est.omega_hat {
            let se: Vec<f64> = (0..3).map(|i| (v.omega[(i, i)] / t as f64).sqrt()).collect();
            println!("            standard errors {se:?}");
        }
        println!("            grid resolution {:?}", est.resolution);
    }
    Ok(())
}
