use super::{BankPath, StructuralModel, TimeSeries};
use crate::error::{IndiiError, Result};
use serde::{Deserialize, Serialize};

/// Log-normal stochastic volatility:
/// `y_t = sqrt(h_t) e_t`, `ln h_t = alpha + delta ln h_{t-1} + sigma_v v_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub alpha: f64,
    pub delta: f64,
    pub sigma_v: f64,
}

impl SvParams {
    pub fn new(alpha: f64, delta: f64, sigma_v: f64) -> Result<Self> {
        let p = Self { alpha, delta, sigma_v };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.delta.is_finite() && self.sigma_v.is_finite()) {
            return Err(IndiiError::InvalidParameter("non-finite SV parameter".into()));
        }
        if self.delta.abs() >= 1.0 {
            return Err(IndiiError::InvalidParameter(format!("|delta| = {} must be < 1", self.delta.abs())));
        }
        if self.sigma_v <= 0.0 {
            return Err(IndiiError::InvalidParameter(format!("sigma_v = {} must be > 0", self.sigma_v)));
        }
        Ok(())
    }

    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        match theta {
            [a, d, s] => Self::new(*a, *d, *s),
            _ => Err(IndiiError::Dimension(format!("SV theta has 3 entries, got {}", theta.len()))),
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.alpha, self.delta, self.sigma_v]
    }

    pub fn stationary_mean(&self) -> f64 {
        self.alpha / (1.0 - self.delta)
    }

    pub fn stationary_var(&self) -> f64 {
        self.sigma_v * self.sigma_v / (1.0 - self.delta * self.delta)
    }
}

/// `kappa^2 = exp(sigma_v^2 / (1 - delta^2)) - 1`, the squared coefficient of variation of h.
pub fn coefficient_of_variation(p: &SvParams) -> f64 {
    (p.sigma_v * p.sigma_v / (1.0 - p.delta * p.delta)).exp_m1()
}

/// Simulate into a reusable buffer. Bank column 0 is e_t, column 1 is v_t.
pub fn simulate_sv_into(p: &SvParams, path: BankPath<'_>, out: &mut Vec<f64>) -> Result<()> {
    simulate_core(p, path, out, None)
}

fn simulate_core(p: &SvParams, path: BankPath<'_>, out: &mut Vec<f64>, mut log_h: Option<&mut Vec<f64>>) -> Result<()> {
    p.validate()?;
    if path.k < 2 {
        return Err(IndiiError::Dimension(format!("SV needs 2 bank columns, got {}", path.k)));
    }
    let n = path.len();
    out.clear();
    out.reserve(n);
    let mut lh = p.stationary_mean() + p.stationary_var().sqrt() * path.init;
    for t in 0..n {
        let e = path.draws[2 * t];
        let v = path.draws[2 * t + 1];
        lh = p.alpha + p.delta * lh + p.sigma_v * v;
        let y = (0.5 * lh).exp() * e;
        if !y.is_finite() {
            return Err(IndiiError::SimulationFailure(format!(
                "non-finite y at t = {} for theta = ({}, {}, {})",
                t + 1,
                p.alpha,
                p.delta,
                p.sigma_v
            )));
        }
        out.push(y);
        if let Some(buf) = log_h.as_deref_mut() {
            buf.push(lh);
        }
    }
    Ok(())
}

pub fn simulate_sv(p: &SvParams, path: BankPath<'_>) -> Result<TimeSeries> {
    let mut out = Vec::new();
    simulate_sv_into(p, path, &mut out)?;
    Ok(TimeSeries { values: out })
}

/// Returns `(y, ln h)`; the latent path is useful for diagnostics.
pub fn simulate_sv_with_log_h(p: &SvParams, path: BankPath<'_>) -> Result<(TimeSeries, Vec<f64>)> {
    let mut out = Vec::new();
    let mut lh = Vec::with_capacity(path.len());
    simulate_core(p, path, &mut out, Some(&mut lh))?;
    Ok((TimeSeries { values: out }, lh))
}

/// The SV model as a simulator for indirect inference.
#[derive(Debug, Clone, Copy, Default)]
pub struct SvModel;

impl StructuralModel for SvModel {
    type Data = TimeSeries;

    fn dim_theta(&self) -> usize {
        3
    }

    fn bank_columns(&self) -> usize {
        2
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        SvParams::from_slice(theta).map(|_| ())
    }

    fn simulate(&self, theta: &[f64], path: BankPath<'_>) -> Result<TimeSeries> {
        simulate_sv(&SvParams::from_slice(theta)?, path)
    }

    fn theta_names(&self) -> Vec<String> {
        vec!["alpha".into(), "delta".into(), "sigma_v".into()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::draw_innovation_bank;

    #[test]
    fn kappa_designs() {
        let k1 = coefficient_of_variation(&SvParams::new(-0.736, 0.90, 0.363).unwrap());
        assert!((k1 - 1.0007).abs() < 1e-3, "{k1}");
        let k2 = coefficient_of_variation(&SvParams::new(-0.141, 0.98, 0.0614).unwrap());
        assert!((k2 - 0.0999).abs() < 1e-3, "{k2}");
        let k0 = coefficient_of_variation(&SvParams { alpha: 0.0, delta: 0.5, sigma_v: 0.0 });
        assert_eq!(k0, 0.0);
    }

    #[test]
    fn degenerate_volatility() {
        let bank = draw_innovation_bank(1, 200, 2, 3);
        let p = SvParams::new(-0.5, 0.0, 1e-300).unwrap();
        let y = simulate_sv(&p, bank.path(0)).unwrap();
        let e = bank.column(0, 0);
        let s = (-0.25f64).exp();
        for (a, b) in y.values.iter().zip(&e) {
            assert!((a - s * b).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_log_variance_and_kappa() {
        let t = 1_000_000;
        let bank = draw_innovation_bank(1, t, 2, 42);
        let p = SvParams::new(-0.736, 0.90, 0.363).unwrap();
        let (_, lh) = simulate_sv_with_log_h(&p, bank.path(0)).unwrap();
        let n = t as f64;
        let m = lh.iter().sum::<f64>() / n;
        let v = lh.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        assert!((v / 0.6935 - 1.0).abs() < 0.01 * 3.0, "var ln h {v}");
        // mean of ln h within 3 s.e. (AR(1) long-run s.e.)
        let se = (p.stationary_var() * (1.0 + p.delta) / (1.0 - p.delta) / n).sqrt();
        assert!((m - p.stationary_mean()).abs() < 3.0 * se, "mean {m}");
        let h: Vec<f64> = lh.iter().map(|x| x.exp()).collect();
        let mh = h.iter().sum::<f64>() / n;
        let vh = h.iter().map(|x| (x - mh) * (x - mh)).sum::<f64>() / n;
        let k2 = vh / (mh * mh);
        assert!((k2 - 1.0).abs() < 0.1, "kappa^2 {k2}");
    }

    #[test]
    fn continuity_in_theta() {
        let bank = draw_innovation_bank(1, 500, 2, 5);
        let base = simulate_sv(&SvParams::new(-0.7, 0.9, 0.3).unwrap(), bank.path(0)).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let y = simulate_sv(&SvParams::new(-0.7 + eps, 0.9, 0.3 + eps).unwrap(), bank.path(0)).unwrap();
            let d = y.values.iter().zip(&base.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d < last);
            last = d;
        }
        assert!(last < 1e-4);
    }

    #[test]
    fn rejects_invalid() {
        assert!(SvParams::new(0.0, 1.0, 0.1).is_err());
        assert!(SvParams::new(0.0, 0.5, 0.0).is_err());
    }
}
