use super::{BankPath, StructuralModel};
use crate::aux::ProbitData;
use crate::error::{IndiiError, Result};
use crate::rng::stream_rng;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Dynamic probit: `y*_t = x_t' theta1 + u_t`, `u_t = theta2 u_{t-1} + nu_t`, `y_t = 1[y*_t > 0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbitParams {
    pub theta1: Vec<f64>,
    pub theta2: f64,
}

impl ProbitParams {
    pub fn new(theta1: Vec<f64>, theta2: f64) -> Result<Self> {
        let p = Self { theta1, theta2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta2.is_finite() || self.theta2.abs() >= 1.0 {
            return Err(IndiiError::InvalidParameter(format!("|theta2| = {} must be < 1", self.theta2)));
        }
        if self.theta1.iter().any(|v| !v.is_finite()) {
            return Err(IndiiError::InvalidParameter("non-finite theta1".into()));
        }
        Ok(())
    }

    /// Layout `(theta1', theta2)`.
    pub fn from_slice(theta: &[f64]) -> Result<Self> {
        if theta.len() < 2 {
            return Err(IndiiError::Dimension("probit theta needs at least 2 entries".into()));
        }
        let d = theta.len() - 1;
        Self::new(theta[..d].to_vec(), theta[d])
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.theta1.clone();
        v.push(self.theta2);
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbitPath {
    pub y: Vec<u8>,
    pub latent: Vec<f64>,
}

pub fn simulate_probit(p: &ProbitParams, x: &DMatrix<f64>, path: BankPath<'_>) -> Result<ProbitPath> {
    p.validate()?;
    if x.ncols() != p.theta1.len() {
        return Err(IndiiError::Dimension(format!(
            "covariates have {} columns, theta1 has {}",
            x.ncols(),
            p.theta1.len()
        )));
    }
    let n = path.len();
    if x.nrows() != n {
        return Err(IndiiError::Dimension(format!("covariates have {} rows, bank path {}", x.nrows(), n)));
    }
    let index = x * nalgebra::DVector::from_column_slice(&p.theta1);
    let mut u = path.init / (1.0 - p.theta2 * p.theta2).sqrt();
    let mut y = Vec::with_capacity(n);
    let mut latent = Vec::with_capacity(n);
    for t in 0..n {
        u = p.theta2 * u + path.get(t, 0);
        let s = index[t] + u;
        latent.push(s);
        y.push(u8::from(s > 0.0));
    }
    Ok(ProbitPath { y, latent })
}

/// `x_t = (1, z_t)` with `z_t` i.i.d. N(0,1) from its own seeded stream.
pub fn default_covariates(t: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let z: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_fn(t, 2, |i, j| if j == 0 { 1.0 } else { z[i] })
}

/// `(1, z_t)` plus further i.i.d. normal columns when `d1 > 2`.
pub fn probit_covariates(t: usize, d1: usize, seed: u64) -> Result<DMatrix<f64>> {
    match d1 {
        0 => Err(IndiiError::Dimension("probit needs at least one covariate".into())),
        2 => Ok(default_covariates(t, seed)),
        _ => {
            let mut rng = stream_rng(seed, 0);
            Ok(DMatrix::from_fn(t, d1, |_, j| if j == 0 { 1.0 } else { rng.sample(StandardNormal) }))
        }
    }
}

/// The probit model with fixed covariates, as a simulator for indirect inference.
#[derive(Debug, Clone)]
pub struct ProbitModel {
    pub x: Arc<DMatrix<f64>>,
}

impl ProbitModel {
    pub fn new(x: Arc<DMatrix<f64>>) -> Self {
        Self { x }
    }
}

impl StructuralModel for ProbitModel {
    type Data = ProbitData;

    fn dim_theta(&self) -> usize {
        self.x.ncols() + 1
    }

    fn bank_columns(&self) -> usize {
        1
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim_theta() {
            return Err(IndiiError::Dimension(format!("probit theta has {} entries", theta.len())));
        }
        ProbitParams::from_slice(theta).map(|_| ())
    }

    fn simulate(&self, theta: &[f64], path: BankPath<'_>) -> Result<ProbitData> {
        let p = ProbitParams::from_slice(theta)?;
        let s = simulate_probit(&p, &self.x, path)?;
        Ok(ProbitData { y: s.y, x: Arc::clone(&self.x) })
    }

    fn theta_names(&self) -> Vec<String> {
        let mut v: Vec<String> = (1..=self.x.ncols()).map(|i| format!("theta1_{i}")).collect();
        v.push("theta2".into());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::draw_innovation_bank;

    fn freq(y: &[u8]) -> f64 {
        y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64
    }

    #[test]
    fn symmetric_latent() {
        let t = 100_000;
        let bank = draw_innovation_bank(1, t, 1, 1);
        let x = DMatrix::from_element(t, 1, 1.0);
        let s = simulate_probit(&ProbitParams::new(vec![0.0], 0.0).unwrap(), &x, bank.path(0)).unwrap();
        assert!((freq(&s.y) - 0.5).abs() < 0.01);
    }

    #[test]
    fn normal_cdf_oracle() {
        let t = 100_000;
        let bank = draw_innovation_bank(1, t, 1, 2);
        let x = DMatrix::from_element(t, 1, 1.0);
        let s = simulate_probit(&ProbitParams::new(vec![1.0], 0.0).unwrap(), &x, bank.path(0)).unwrap();
        // Phi(1) = 0.841344746...
        assert!((freq(&s.y) - 0.841_344_746).abs() < 0.005, "{}", freq(&s.y));
    }

    #[test]
    fn positive_dependence() {
        let t = 20_000;
        let bank = draw_innovation_bank(1, t, 1, 3);
        let x = DMatrix::from_element(t, 1, 1.0);
        let s = simulate_probit(&ProbitParams::new(vec![0.0], 0.5).unwrap(), &x, bank.path(0)).unwrap();
        let y: Vec<f64> = s.y.iter().map(|&v| v as f64).collect();
        let m = y.iter().sum::<f64>() / t as f64;
        let c = (1..t).map(|i| (y[i] - m) * (y[i - 1] - m)).sum::<f64>();
        assert!(c > 0.0);
    }

    #[test]
    fn dimension_mismatch() {
        let bank = draw_innovation_bank(1, 10, 1, 3);
        let x = default_covariates(10, 1);
        assert!(simulate_probit(&ProbitParams::new(vec![0.0], 0.0).unwrap(), &x, bank.path(0)).is_err());
    }
}
