use crate::error::{IndiiError, Result};
use crate::aux::special::norm_pdf;
use serde::Serialize;

pub const DENSITY_GRID_POINTS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Density {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    /// Observations left after trimming.
    pub n: usize,
}

/// `1.06 sigma n^(-1/5)`, sigma with divisor n.
pub fn silverman_bandwidth(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    1.06 * sd * n.powf(-0.2)
}

/// Gaussian-kernel density after dropping the lowest `trim_lower` fraction of the sample.
pub fn kernel_density(samples: &[f64], bandwidth: Option<f64>, trim_lower: f64) -> Result<Density> {
    if samples.len() < 10 {
        return Err(IndiiError::Degenerate(format!("{} samples, need at least 10", samples.len())));
    }
    if !(0.0..1.0).contains(&trim_lower) {
        return Err(IndiiError::InvalidParameter("trim_lower must lie in [0, 1)".into()));
    }
    let mut x: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
    x.sort_by(f64::total_cmp);
    let drop = (trim_lower * x.len() as f64).floor() as usize;
    let x = &x[drop..];
    let bw = match bandwidth {
        Some(b) if b > 0.0 => b,
        Some(_) => return Err(IndiiError::InvalidParameter("bandwidth must be positive".into())),
        None => silverman_bandwidth(x),
    };
    if !(bw > 0.0) || x.len() < 2 {
        return Err(IndiiError::Degenerate("zero-variance sample".into()));
    }
    let lo = x[0] - 3.0 * bw;
    let hi = x[x.len() - 1] + 3.0 * bw;
    let n = x.len() as f64;
    let grid: Vec<f64> =
        (0..DENSITY_GRID_POINTS).map(|i| lo + (hi - lo) * i as f64 / (DENSITY_GRID_POINTS - 1) as f64).collect();
    let density = grid.iter().map(|g| x.iter().map(|v| norm_pdf((g - v) / bw)).sum::<f64>() / (n * bw)).collect();
    Ok(Density { grid, density, bandwidth: bw, n: x.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trim_and_normalization() {
        let x: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = kernel_density(&x, None, 0.0).unwrap();
        assert_eq!(d.n, 200);
        let step = d.grid[1] - d.grid[0];
        let area: f64 = d.density.iter().sum::<f64>() * step;
        assert!((area - 1.0).abs() < 1e-3, "{area}");
        assert_eq!(kernel_density(&x, None, 0.015).unwrap().n, 197);
        assert!(kernel_density(&[1.0; 20], None, 0.0).is_err());
    }
}
