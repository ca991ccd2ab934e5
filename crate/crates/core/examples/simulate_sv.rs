//! Simulate the log-normal SV model from a frozen innovation bank and compare
//! sample moments with their population values.
//!
//! cargo run --release --example simulate_sv -- [T] [seed]

use indii::sim::{coefficient_of_variation, draw_innovation_bank, simulate_sv_with_log_h, SvParams};

fn main() -> indii::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let t = args.first().copied().unwrap_or(100_000) as usize;
    let seed = args.get(1).copied().unwrap_or(7);
    for (name, p) in [("design 1", SvParams::new(-0.736, 0.90, 0.363)?), ("design 2", SvParams::new(-0.141, 0.98, 0.0614)?)] {
        let bank = draw_innovation_bank(1, t, 2, seed);
        let (y, log_h) = simulate_sv_with_log_h(&p, bank.path(0))?;
        let n = t as f64;
        let mean_lh = log_h.iter().sum::<f64>() / n;
        let var_lh = log_h.iter().map(|v| (v - mean_lh).powi(2)).sum::<f64>() / n;
        let m2 = y.values.iter().map(|v| v * v).sum::<f64>() / n;
        let m4 = y.values.iter().map(|v| v.powi(4)).sum::<f64>() / n;
        println!("{name}: T = {t}, CV of h = {:.3}", coefficient_of_variation(&p));
        println!("  E ln h   sample {:8.4}  population {:8.4}", mean_lh, p.stationary_mean());
        println!("  Var ln h sample {:8.4}  population {:8.4}", var_lh, p.stationary_var());
        let pop_m2 = (p.stationary_mean() + p.stationary_var() / 2.0).exp();
        println!("  E y^2    sample {:8.4}  population {:8.4}", m2, pop_m2);
        println!("  kurtosis sample {:8.4}  population {:8.4}", m4 / (m2 * m2), 3.0 * p.stationary_var().exp());
    }
    Ok(())
}
