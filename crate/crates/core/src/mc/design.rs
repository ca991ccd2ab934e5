use crate::aux::BoundRule;
use crate::error::{IndiiError, Result};
use crate::ii::{GridSpec, SearchMetric, Variant};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Slopes `(intercept, z)` of the probit index used by the probit designs.
pub const PROBIT_THETA1: [f64; 2] = [0.5, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    Jpr1,
    Jpr2,
    ProbitNull,
    ProbitAlt,
    Overid,
}

impl DesignKind {
    pub const ALL: [DesignKind; 5] =
        [DesignKind::Jpr1, DesignKind::Jpr2, DesignKind::ProbitNull, DesignKind::ProbitAlt, DesignKind::Overid];

    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Jpr1 => "jpr1",
            DesignKind::Jpr2 => "jpr2",
            DesignKind::ProbitNull => "probit-null",
            DesignKind::ProbitAlt => "probit-alt",
            DesignKind::Overid => "overid",
        }
    }

    pub fn is_sv(&self) -> bool {
        matches!(self, DesignKind::Jpr1 | DesignKind::Jpr2)
    }

    pub fn is_probit(&self) -> bool {
        matches!(self, DesignKind::ProbitNull | DesignKind::ProbitAlt)
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = IndiiError;
    fn from_str(s: &str) -> Result<Self> {
        DesignKind::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == s.to_ascii_lowercase().replace('_', "-"))
            .ok_or_else(|| IndiiError::InvalidParameter(format!("unknown design '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CriterionId {
    Garch,
    GarchT,
    Probit0,
}

impl CriterionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            CriterionId::Garch => "garch",
            CriterionId::GarchT => "garch-t",
            CriterionId::Probit0 => "probit0",
        }
    }
}

impl FromStr for CriterionId {
    type Err = IndiiError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "garch" => Ok(CriterionId::Garch),
            "garch-t" => Ok(CriterionId::GarchT),
            "probit0" | "probit" => Ok(CriterionId::Probit0),
            other => Err(IndiiError::InvalidParameter(format!("unknown criterion '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McDesign {
    pub name: String,
    pub kind: DesignKind,
    pub theta0: Vec<f64>,
    pub t: usize,
    pub reps: usize,
    pub h: usize,
    pub seed: u64,
    pub criterion: CriterionId,
    /// `phi >= c T^-kappa` for the GARCH designs.
    pub phi_bound: BoundRule,
    pub variants: Vec<Variant>,
    /// Skip the I-I step and only record auxiliary fits.
    pub run_ii: bool,
    pub grid: GridSpec,
    pub polish: bool,
    pub search_metric: SearchMetric,
    /// Instance name for the selection-matrix design.
    pub instance: String,
}

impl McDesign {
    pub fn preset(kind: DesignKind, t: usize, reps: usize, seed: u64) -> Self {
        let (theta0, criterion, run_ii) = match kind {
            DesignKind::Jpr1 => (vec![-0.736, 0.90, 0.363], CriterionId::Garch, true),
            DesignKind::Jpr2 => (vec![-0.141, 0.98, 0.0614], CriterionId::Garch, true),
            DesignKind::ProbitNull => (vec![PROBIT_THETA1[0], PROBIT_THETA1[1], 0.0], CriterionId::Probit0, false),
            DesignKind::ProbitAlt => (vec![PROBIT_THETA1[0], PROBIT_THETA1[1], 0.5], CriterionId::Probit0, true),
            DesignKind::Overid => (vec![], CriterionId::Garch, true),
        };
        Self {
            name: kind.as_str().into(),
            kind,
            theta0,
            t,
            reps,
            h: 10,
            seed,
            criterion,
            phi_bound: crate::aux::default_phi_bound(),
            variants: vec![Variant::ScoreOurs],
            run_ii,
            grid: GridSpec::default(),
            polish: true,
            search_metric: SearchMetric::InverseJ,
            instance: "linear".into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(IndiiError::InvalidParameter("reps must be at least 1".into()));
        }
        if self.h == 0 {
            return Err(IndiiError::InvalidParameter("H must be at least 1".into()));
        }
        if self.t < 10 {
            return Err(IndiiError::InvalidParameter("T must be at least 10".into()));
        }
        if self.kind.is_sv() {
            if self.theta0.len() != 3 {
                return Err(IndiiError::Dimension("SV designs need theta0 = (alpha, delta, sigma_v)".into()));
            }
            if self.criterion == CriterionId::Probit0 {
                return Err(IndiiError::InvalidParameter("SV designs need a GARCH criterion".into()));
            }
        }
        if self.kind.is_probit() && (self.theta0.len() < 2 || self.criterion != CriterionId::Probit0) {
            return Err(IndiiError::InvalidParameter("probit designs need theta0 = (theta1', theta2) and probit0".into()));
        }
        if self.run_ii && self.variants.is_empty() && self.kind != DesignKind::Overid {
            return Err(IndiiError::InvalidParameter("no I-I variant selected".into()));
        }
        Ok(())
    }
}
