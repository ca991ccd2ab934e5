//! Structural models and frozen innovation banks.

mod bank;
mod probit;
mod sv;

pub use bank::{draw_innovation_bank, BankPath, InnovationBank};
pub use probit::{default_covariates, probit_covariates, simulate_probit, ProbitModel, ProbitParams, ProbitPath};
pub use sv::{coefficient_of_variation, SvModel, simulate_sv, simulate_sv_into, simulate_sv_with_log_h, SvParams};

use crate::error::{IndiiError, Result};

/// Observed or simulated scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(IndiiError::InvalidParameter(format!("non-finite observation at t = {}", t + 1)));
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A structural model that can be simulated from one path of a frozen bank.
pub trait StructuralModel: Sync {
    type Data: Send + Sync;

    fn dim_theta(&self) -> usize;
    /// Number of innovation columns per period.
    fn bank_columns(&self) -> usize;
    fn check_theta(&self, theta: &[f64]) -> Result<()>;
    fn simulate(&self, theta: &[f64], path: BankPath<'_>) -> Result<Self::Data>;
    fn theta_names(&self) -> Vec<String>;
}
