//! Compare selection matrices for an overidentified auxiliary system: the naive
//! choice Gamma' V^-1 against the one built from Gamma_theta, in theory and by
//! Monte Carlo.
//!
//! cargo run --release --example overid_selection -- [instance] [reps] [T]

use indii::overid::{avar_beta, ii_avar_theta, monte_carlo_variance, naive_optimal_a, optimal_a_for_theta, MomentSystem};
use nalgebra::DMatrix;

fn main() -> indii::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let instance = args.first().map(String::as_str).unwrap_or("linear");
    let reps = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let t = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let system = MomentSystem::by_name(instance, 5)?;
    let naive = naive_optimal_a(&system.gamma, &system.v)?;
    let extra = system.d_beta() - system.d_theta();
    let c = DMatrix::from_fn(system.q(), extra, |i, j| if i == j + system.d_theta() { 1.0 } else { 0.0 });
    let optimal = optimal_a_for_theta(&system.gamma_theta, &system.v, &c)?;
    let efficient = (system.gamma_theta.transpose() * system.v.clone().try_inverse().unwrap() * &system.gamma_theta)
        .try_inverse()
        .unwrap();
    println!("{instance}: q = {}, d_beta = {}, d_theta = {}", system.q(), system.d_beta(), system.d_theta());
    println!("efficiency bound {efficient:.5}");
    let mut identified = Vec::new();
    for (name, a) in [("naive", naive), ("optimal", optimal)] {
        match ii_avar_theta(&a, &system.gamma_theta, &system.v) {
            Ok(v) => {
                println!("{name} asymptotic variance {v:.5}");
                // beta_hat(A) exists only when A Gamma is invertible
                match avar_beta(&a, &system.gamma, &system.v) {
                    Ok(_) => identified.push((name.to_string(), a)),
                    Err(e) => println!("{name}: no Monte Carlo, {e}"),
                }
            }
            Err(e) => println!("{name}: {e}"),
        }
    }
    if identified.is_empty() {
        return Ok(());
    }
    let mc = monte_carlo_variance(&system, &identified, reps, t, 99)?;
    for (name, v) in mc.names.iter().zip(&mc.scaled_variance) {
        println!("{name} Monte Carlo T*Var over {reps} reps {v:.5}");
    }
    Ok(())
}
