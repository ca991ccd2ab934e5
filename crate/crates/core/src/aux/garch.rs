use super::special::{StudentConst, LN_2PI};
use super::{constraint_values, garch_spec, garch_t_spec, ConstraintSpec, Criterion, CriterionEval};
use super::{default_eta_gap, default_phi_bound, BoundRule};
use crate::error::{IndiiError, Result};
use crate::sim::TimeSeries;
use nalgebra::{DMatrix, DVector};

/// Below this eta the Student-t criterion uses the Gaussian value and h-derivatives.
pub const STUDENT_GAUSSIAN_SWITCH: f64 = 1e-8;

const H_FLOOR: f64 = 1e-300;

/// Conditional variances `h_t = psi + phi y_{t-1}^2 + pi h_{t-1}`, `h_1 = mean(y^2)`.
pub fn garch_filter(beta: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if beta.len() < 3 {
        return Err(IndiiError::Dimension("GARCH needs (psi, phi, pi)".into()));
    }
    if y.is_empty() {
        return Err(IndiiError::Dimension("empty series".into()));
    }
    let (psi, phi, pi) = (beta[0], beta[1], beta[2]);
    let mut h = Vec::with_capacity(y.len());
    let mut ht = mean_sq(y);
    for t in 0..y.len() {
        if t > 0 {
            ht = psi + phi * y[t - 1] * y[t - 1] + pi * ht;
        }
        if !(ht > H_FLOOR) || !ht.is_finite() {
            return Err(IndiiError::NonPositiveVariance { t: t + 1 });
        }
        h.push(ht);
    }
    Ok(h)
}

fn mean_sq(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64
}

/// Per-observation log-density derivatives with respect to h and eta.
#[derive(Clone, Copy, Default)]
struct Local {
    l: f64,
    lh: f64,
    lhh: f64,
    le: f64,
    lee: f64,
    lhe: f64,
}

#[inline]
fn gaussian_local(h: f64, u: f64) -> Local {
    Local {
        l: -0.5 * (LN_2PI + h.ln() + u),
        lh: 0.5 * (u - 1.0) / h,
        lhh: (1.0 - 2.0 * u) / (2.0 * h * h),
        ..Local::default()
    }
}

/// Shared recursion. `local(h, u)` supplies the density derivatives;
/// `with_eta` appends the eta block. Contributions are written to `contrib` if given.
fn accumulate(
    beta: &[f64],
    y: &[f64],
    with_eta: bool,
    local: impl Fn(f64, f64) -> Local,
    mut contrib: Option<&mut DMatrix<f64>>,
) -> Result<CriterionEval> {
    let n = y.len();
    if n == 0 {
        return Err(IndiiError::Dimension("empty series".into()));
    }
    let (psi, phi, pi) = (beta[0], beta[1], beta[2]);
    let d = if with_eta { 4 } else { 3 };
    let mut value = 0.0;
    let mut s = [0.0f64; 4];
    let mut hs = [[0.0f64; 4]; 4];
    let mut h = mean_sq(y);
    let mut dh = [0.0f64; 3];
    // second derivatives of h: only the (i, pi) entries are non-zero
    let mut d2 = [0.0f64; 3];
    for t in 0..n {
        if t > 0 {
            let y2 = y[t - 1] * y[t - 1];
            let nd2 = [pi * d2[0] + dh[0], pi * d2[1] + dh[1], pi * d2[2] + 2.0 * dh[2]];
            let ndh = [1.0 + pi * dh[0], y2 + pi * dh[1], h + pi * dh[2]];
            h = psi + phi * y2 + pi * h;
            dh = ndh;
            d2 = nd2;
        }
        if !(h > H_FLOOR) || !h.is_finite() {
            return Err(IndiiError::NonPositiveVariance { t: t + 1 });
        }
        let u = y[t] * y[t] / h;
        let lc = local(h, u);
        value += lc.l;
        for i in 0..3 {
            s[i] += lc.lh * dh[i];
            for j in 0..=i {
                hs[i][j] += lc.lhh * dh[i] * dh[j];
            }
            hs[2][i] += lc.lh * d2[i];
        }
        if with_eta {
            s[3] += lc.le;
            hs[3][3] += lc.lee;
            for i in 0..3 {
                hs[3][i] += lc.lhe * dh[i];
            }
        }
        if let Some(c) = contrib.as_deref_mut() {
            for i in 0..3 {
                c[(t, i)] = lc.lh * dh[i];
            }
            if with_eta {
                c[(t, 3)] = lc.le;
            }
        }
    }
    let inv = 1.0 / n as f64;
    let score = DVector::from_iterator(d, s[..d].iter().map(|v| v * inv));
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let v = hs[i][j] * inv;
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let out = CriterionEval { value: value * inv, score, hessian: hess };
    if !out.is_finite() {
        return Err(IndiiError::NonPositiveVariance { t: n });
    }
    Ok(out)
}

fn check_garch(beta: &[f64], d: usize) -> Result<()> {
    if beta.len() != d {
        return Err(IndiiError::Dimension(format!("GARCH beta needs {d} entries, got {}", beta.len())));
    }
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(IndiiError::Domain("non-finite GARCH parameter".into()));
    }
    Ok(())
}

pub fn garch_gaussian_eval(beta: &[f64], y: &[f64]) -> Result<CriterionEval> {
    check_garch(beta, 3)?;
    accumulate(beta, y, false, gaussian_local, None)
}

fn student_local(eta: f64) -> impl Fn(f64, f64) -> Local {
    let sc = StudentConst::new(eta);
    let gaussian = eta < STUDENT_GAUSSIAN_SWITCH;
    move |h: f64, u: f64| {
        let t = sc.terms(u);
        let (l, lh, lhh) = if gaussian {
            let g = gaussian_local(h, u);
            (g.l, g.lh, g.lhh)
        } else {
            (
                -0.5 * h.ln() + t.f,
                -0.5 / h - t.f_u * u / h,
                (0.5 + t.f_uu * u * u + 2.0 * t.f_u * u) / (h * h),
            )
        };
        Local { l, lh, lhh, le: t.f_e, lee: t.f_ee, lhe: -t.f_ue * u / h }
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..0.5).contains(&eta) {
        return Err(IndiiError::Domain(format!("eta = {eta} outside [0, .5)")));
    }
    Ok(())
}

/// Unit-variance Student-t GARCH with `1/eta` degrees of freedom; beta = (psi, phi, pi, eta).
pub fn garch_student_eval(beta: &[f64], y: &[f64]) -> Result<CriterionEval> {
    check_garch(beta, 4)?;
    check_eta(beta[3])?;
    accumulate(beta, y, true, student_local(beta[3]), None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GarchDensity {
    Gaussian,
    Student,
}

#[derive(Debug, Clone)]
pub struct GarchCriterion {
    pub density: GarchDensity,
    pub spec: ConstraintSpec,
}

impl GarchCriterion {
    pub fn gaussian(phi_bound: BoundRule) -> Self {
        Self { density: GarchDensity::Gaussian, spec: garch_spec(phi_bound) }
    }

    pub fn student(phi_bound: BoundRule, eta_gap: BoundRule) -> Self {
        Self { density: GarchDensity::Student, spec: garch_t_spec(phi_bound, eta_gap) }
    }

    pub fn default_gaussian() -> Self {
        Self::gaussian(default_phi_bound())
    }

    pub fn default_student() -> Self {
        Self::student(default_phi_bound(), default_eta_gap())
    }

    pub fn with_spec(density: GarchDensity, spec: ConstraintSpec) -> Self {
        Self { density, spec }
    }
}

impl Criterion for GarchCriterion {
    type Data = TimeSeries;

    fn name(&self) -> String {
        match self.density {
            GarchDensity::Gaussian => "garch".into(),
            GarchDensity::Student => "garch-t".into(),
        }
    }

    fn dim(&self) -> usize {
        match self.density {
            GarchDensity::Gaussian => 3,
            GarchDensity::Student => 4,
        }
    }

    fn param_names(&self) -> Vec<String> {
        let mut v: Vec<String> = ["psi", "phi", "pi"].iter().map(|s| s.to_string()).collect();
        if self.density == GarchDensity::Student {
            v.push("eta".into());
        }
        v
    }

    fn constraints(&self) -> &ConstraintSpec {
        &self.spec
    }

    fn sample_size(&self, data: &TimeSeries) -> usize {
        data.len()
    }

    fn evaluate(&self, beta: &DVector<f64>, data: &TimeSeries) -> Result<CriterionEval> {
        match self.density {
            GarchDensity::Gaussian => garch_gaussian_eval(beta.as_slice(), &data.values),
            GarchDensity::Student => garch_student_eval(beta.as_slice(), &data.values),
        }
    }

    fn score_contributions(&self, beta: &DVector<f64>, data: &TimeSeries) -> Result<DMatrix<f64>> {
        let b = beta.as_slice();
        let mut c = DMatrix::zeros(data.len(), self.dim());
        match self.density {
            GarchDensity::Gaussian => {
                check_garch(b, 3)?;
                accumulate(b, &data.values, false, gaussian_local, Some(&mut c))?;
            }
            GarchDensity::Student => {
                check_garch(b, 4)?;
                check_eta(b[3])?;
                accumulate(b, &data.values, true, student_local(b[3]), Some(&mut c))?;
            }
        }
        Ok(c)
    }

    /// `(psi, phi, pi) = ((1 - phi - pi) E[y^2], .05, .85)` unless a tighter spec makes that
    /// infeasible, in which case larger phi values are tried.
    fn default_start(&self, data: &TimeSeries) -> DVector<f64> {
        let m = mean_sq(&data.values);
        let t = data.len();
        let make = |phi: f64| {
            let pi = (0.9 - phi).max(0.0);
            let mut v = vec![(1.0 - phi - pi) * m, phi, pi];
            if self.density == GarchDensity::Student {
                v.push(0.1);
            }
            DVector::from_vec(v)
        };
        let strict = |b: &DVector<f64>| {
            let cv = constraint_values(b, &self.spec, t);
            (0..self.spec.len()).all(|j| self.spec.is_equality(j) || cv.slack[j] > 0.0)
        };
        [0.05, 0.1, 0.2, 0.3, 0.45, 0.6, 0.75]
            .into_iter()
            .map(make)
            .find(|b| strict(b))
            .unwrap_or_else(|| make(0.05))
    }
}
