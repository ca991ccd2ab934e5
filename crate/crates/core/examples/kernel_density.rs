//! Kernel density of standard normal draws with the Silverman bandwidth,
//! printed against the true density at a few points.
//!
//! cargo run --release --example kernel_density -- [n]

use indii::mc::kernel_density;
use indii::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> indii::Result<()> {
    let n = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5000usize);
    let mut rng = stream_rng(3, 0);
    let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let d = kernel_density(&x, None, 0.0)?;
    println!("n = {n}, bandwidth = {:.4}", d.bandwidth);
    for target in [-2.0, -1.0, 0.0, 1.0, 2.0] {
        let i = d.grid.iter().enumerate().min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs())).unwrap().0;
        let truth = (-0.5 * d.grid[i] * d.grid[i]).exp() / (2.0 * std::f64::consts::PI).sqrt();
        println!("  x = {:6.3}  estimate {:.4}  N(0,1) {:.4}", d.grid[i], d.density[i], truth);
    }
    Ok(())
}
