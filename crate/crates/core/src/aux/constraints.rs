use crate::error::{IndiiError, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Inequality,
    Equality,
}

/// `a_T = c * T^(-kappa)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRule {
    pub c: f64,
    pub kappa: f64,
}

impl BoundRule {
    pub const ZERO: BoundRule = BoundRule { c: 0.0, kappa: 0.0 };

    pub fn constant(c: f64) -> Self {
        Self { c, kappa: 0.0 }
    }

    pub fn at(&self, t: usize) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            self.c * (t as f64).powf(-self.kappa)
        }
    }
}

pub type SmoothFn = Arc<dyn Fn(&DVector<f64>) -> (f64, DVector<f64>) + Send + Sync>;

#[derive(Clone)]
pub enum ConstraintFn {
    /// `g(beta) = coef' beta + offset`
    Linear { coef: DVector<f64>, offset: f64 },
    /// Value and gradient.
    Smooth(SmoothFn),
}

impl std::fmt::Debug for ConstraintFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConstraintFn::Linear { coef, offset } => write!(f, "Linear({:?}, {offset})", coef.as_slice()),
            ConstraintFn::Smooth(_) => write!(f, "Smooth(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub label: String,
    pub kind: ConstraintKind,
    pub g: ConstraintFn,
    pub bound: BoundRule,
}

impl Constraint {
    pub fn linear(label: &str, kind: ConstraintKind, coef: &[f64], offset: f64, bound: BoundRule) -> Self {
        Self {
            label: label.to_string(),
            kind,
            g: ConstraintFn::Linear { coef: DVector::from_column_slice(coef), offset },
            bound,
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.g, ConstraintFn::Linear { .. })
    }

    pub fn eval(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        match &self.g {
            ConstraintFn::Linear { coef, offset } => (coef.dot(beta) + offset, coef.clone()),
            ConstraintFn::Smooth(f) => f(beta),
        }
    }
}

/// Slack `g(beta) - a_T` (equalities: `g(beta)`) and the Jacobian with one row per constraint.
#[derive(Debug, Clone)]
pub struct ConstraintValues {
    pub slack: DVector<f64>,
    pub jacobian: DMatrix<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct ConstraintSpec {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSpec {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        Self { constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn all_linear(&self) -> bool {
        self.constraints.iter().all(Constraint::is_linear)
    }

    pub fn bounds(&self, t: usize) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.constraints.iter().map(|c| match c.kind {
                ConstraintKind::Inequality => c.bound.at(t),
                ConstraintKind::Equality => 0.0,
            }),
        )
    }

    pub fn is_equality(&self, j: usize) -> bool {
        self.constraints[j].kind == ConstraintKind::Equality
    }

    pub fn equality_count(&self) -> usize {
        self.constraints.iter().filter(|c| c.kind == ConstraintKind::Equality).count()
    }

    pub fn labels(&self) -> Vec<String> {
        self.constraints.iter().map(|c| c.label.clone()).collect()
    }
}

pub fn constraint_values(beta: &DVector<f64>, spec: &ConstraintSpec, t: usize) -> ConstraintValues {
    let q = spec.len();
    let d = beta.len();
    let mut slack = DVector::zeros(q);
    let mut jacobian = DMatrix::zeros(q, d);
    let a = spec.bounds(t);
    for (j, c) in spec.constraints.iter().enumerate() {
        let (g, grad) = c.eval(beta);
        slack[j] = g - a[j];
        jacobian.set_row(j, &grad.transpose());
    }
    ConstraintValues { slack, jacobian }
}

/// Default GARCH(1,1) constraints in the order psi >= 0, phi >= c T^-kappa, pi >= 0, phi + pi <= 1.
pub fn garch_spec(phi_bound: BoundRule) -> ConstraintSpec {
    use ConstraintKind::Inequality as I;
    ConstraintSpec::new(vec![
        Constraint::linear("psi >= 0", I, &[1.0, 0.0, 0.0], 0.0, BoundRule::ZERO),
        Constraint::linear("phi >= a_T", I, &[0.0, 1.0, 0.0], 0.0, phi_bound),
        Constraint::linear("pi >= 0", I, &[0.0, 0.0, 1.0], 0.0, BoundRule::ZERO),
        Constraint::linear("phi + pi <= 1", I, &[0.0, -1.0, -1.0], 1.0, BoundRule::ZERO),
    ])
}

pub fn default_phi_bound() -> BoundRule {
    BoundRule { c: 0.1, kappa: 0.49 }
}

/// GARCH constraints extended to `(psi, phi, pi, eta)` with `eta >= 0` and `.5 - eta >= eta_gap`.
pub fn garch_t_spec(phi_bound: BoundRule, eta_gap: BoundRule) -> ConstraintSpec {
    use ConstraintKind::Inequality as I;
    let mut cs: Vec<Constraint> = garch_spec(phi_bound)
        .constraints
        .into_iter()
        .map(|c| match c.g {
            ConstraintFn::Linear { coef, offset } => Constraint {
                g: ConstraintFn::Linear { coef: coef.push(0.0), offset },
                ..c
            },
            ConstraintFn::Smooth(_) => unreachable!(),
        })
        .collect();
    cs.push(Constraint::linear("eta >= 0", I, &[0.0, 0.0, 0.0, 1.0], 0.0, BoundRule::ZERO));
    cs.push(Constraint::linear(".5 - eta >= a_T", I, &[0.0, 0.0, 0.0, -1.0], 0.5, eta_gap));
    ConstraintSpec::new(cs)
}

pub fn default_eta_gap() -> BoundRule {
    BoundRule { c: 0.1, kappa: 0.49 }
}

/// Single equality `beta_last = 0`, encoded as `g = -beta_last`.
pub fn zero_last_spec(d: usize, label: &str) -> ConstraintSpec {
    let mut coef = vec![0.0; d];
    coef[d - 1] = -1.0;
    ConstraintSpec::new(vec![Constraint::linear(label, ConstraintKind::Equality, &coef, 0.0, BoundRule::ZERO)])
}

/// On-disk form of linear constraint specs (TOML):
///
/// ```toml
/// [[inequality]]
/// label = "phi >= a_T"
/// coef = [0.0, 1.0, 0.0]
/// offset = 0.0
/// c = 0.1
/// kappa = 0.49
///
/// [[equality]]
/// coef = [0.0, 0.0, -1.0]
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConstraintFile {
    #[serde(default)]
    pub inequality: Vec<LinearEntry>,
    #[serde(default)]
    pub equality: Vec<LinearEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearEntry {
    #[serde(default)]
    pub label: Option<String>,
    pub coef: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub kappa: f64,
}

impl ConstraintFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| IndiiError::Config(format!("constraint spec: {e}")))
    }

    pub fn into_spec(self, d: usize) -> Result<ConstraintSpec> {
        let mut out = Vec::new();
        for (kind, list) in [(ConstraintKind::Inequality, self.inequality), (ConstraintKind::Equality, self.equality)] {
            for (i, e) in list.into_iter().enumerate() {
                if e.coef.len() != d {
                    return Err(IndiiError::Config(format!("constraint {i}: coef has {} entries, need {d}", e.coef.len())));
                }
                if e.c < 0.0 || e.kappa < 0.0 {
                    return Err(IndiiError::Config(format!("constraint {i}: c and kappa must be >= 0")));
                }
                let label = e.label.unwrap_or_else(|| format!("{kind:?} {i}"));
                out.push(Constraint::linear(&label, kind, &e.coef, e.offset, BoundRule { c: e.c, kappa: e.kappa }));
            }
        }
        Ok(ConstraintSpec::new(out))
    }
}
