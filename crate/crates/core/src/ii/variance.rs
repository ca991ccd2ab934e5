use super::moments::SimulatedCriterion;
use crate::aux::Criterion;
use crate::constrained::ConstrainedFit;
use crate::error::{IndiiError, Result};
use crate::linalg::{clip_eigen_below, dependent_columns, inverse, inverse_pd, require_pd, symmetrize};
use crate::sim::StructuralModel;
use nalgebra::{DMatrix, DVector};

pub const INFO_EIGEN_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct InfoMatrices {
    pub i_hat: DMatrix<f64>,
    pub j_hat: DMatrix<f64>,
    pub bandwidth: usize,
    /// True when `i_hat` needed eigenvalue clipping.
    pub clipped: bool,
}

/// `floor(4 (T/100)^(2/9))`.
pub fn newey_west_bandwidth(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Uncentred Bartlett-kernel long-run variance of the rows of `s` (T x d).
pub fn newey_west(s: &DMatrix<f64>, bandwidth: usize) -> DMatrix<f64> {
    let t = s.nrows();
    let d = s.ncols();
    let mut out = DMatrix::zeros(d, d);
    if t == 0 {
        return out;
    }
    let st = s.transpose();
    for lag in 0..=bandwidth.min(t - 1) {
        let a = st.columns(lag, t - lag);
        let b = st.columns(0, t - lag);
        let g = a * b.transpose() / t as f64;
        if lag == 0 {
            out += g;
        } else {
            let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
            out += (&g + g.transpose()) * w;
        }
    }
    symmetrize(&out)
}

pub fn estimate_info_matrices<C: Criterion>(crit: &C, data: &C::Data, fit: &ConstrainedFit) -> Result<InfoMatrices> {
    let s = crit.score_contributions(&fit.beta_r, data)?;
    let bandwidth = newey_west_bandwidth(s.nrows());
    let raw = newey_west(&s, bandwidth);
    let (i_hat, clipped) = clip_eigen_below(&raw, INFO_EIGEN_FLOOR);
    if clipped {
        log::warn!("long-run score variance not positive definite; eigenvalues clipped at {INFO_EIGEN_FLOOR}");
    }
    let j_hat = symmetrize(&(-&fit.eval.hessian));
    Ok(InfoMatrices { i_hat, j_hat, bandwidth, clipped })
}

/// `W* = J I^{-1} J`.
pub fn optimal_weighting(i0: &DMatrix<f64>, j0: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_pd(i0, "I0")?;
    require_pd(j0, "J0")?;
    Ok(symmetrize(&(j0 * inverse_pd(i0, "I0")? * j0)))
}

#[derive(Debug, Clone)]
pub struct AsymptoticVariance {
    /// `(1 + 1/H) A^{-1} B A^{-1}` for the given W.
    pub omega: DMatrix<f64>,
    /// `(1 + 1/H) (D' I^{-1} D)^{-1}`.
    pub omega_star: DMatrix<f64>,
    pub factor: f64,
}

/// Sandwich variance of the score-matching estimator with `D = dL/dtheta'` (d_beta x d_theta).
pub fn asymptotic_variance(
    dl_dtheta: &DMatrix<f64>,
    i0: &DMatrix<f64>,
    j0: &DMatrix<f64>,
    w: &DMatrix<f64>,
    h: usize,
) -> Result<AsymptoticVariance> {
    let d = dl_dtheta;
    if h == 0 {
        return Err(IndiiError::InvalidParameter("H must be at least 1".into()));
    }
    let db = d.nrows();
    for (m, name) in [(i0, "I0"), (j0, "J0"), (w, "W")] {
        if m.nrows() != db || m.ncols() != db {
            return Err(IndiiError::Dimension(format!("{name} must be {db}x{db}")));
        }
    }
    let dep = dependent_columns(d, 1e-10);
    if !dep.is_empty() || d.ncols() > db {
        let dep = if dep.is_empty() { (db..d.ncols()).collect() } else { dep };
        return Err(IndiiError::RankDeficient(dep));
    }
    let jinv = inverse(j0, "J0")?;
    let iinv = inverse_pd(i0, "I0")?;
    let k = &jinv * w * &jinv;
    let a = symmetrize(&(d.transpose() * &k * d));
    let b = symmetrize(&(d.transpose() * &k * i0 * &k * d));
    let ainv = inverse(&a, "A")?;
    let factor = 1.0 + 1.0 / h as f64;
    let omega = symmetrize(&(&ainv * b * &ainv)) * factor;
    let omega_star = symmetrize(&inverse(&symmetrize(&(d.transpose() * iinv * d)), "D' I^-1 D")?) * factor;
    Ok(AsymptoticVariance { omega, omega_star, factor })
}

/// Central differences of the simulated score mean over theta, step `1e-3 (1 + |theta_i|)`.
/// Falls back to a one-sided difference when a neighbour leaves the parameter space.
pub fn d_l_d_theta<M, C>(sim: &SimulatedCriterion<'_, M, C>, theta: &[f64], beta: &DVector<f64>) -> Result<DMatrix<f64>>
where
    M: StructuralModel,
    C: Criterion<Data = M::Data>,
{
    let score = |th: &[f64]| sim.evaluate(th, beta).map(|e| e.score);
    let mut out = DMatrix::zeros(beta.len(), theta.len());
    let mut centre = None;
    for i in 0..theta.len() {
        let h = 1e-3 * (1.0 + theta[i].abs());
        let mut up = theta.to_vec();
        up[i] += h;
        let mut dn = theta.to_vec();
        dn[i] -= h;
        let col = match (score(&up), score(&dn)) {
            (Ok(a), Ok(b)) => (a - b) / (2.0 * h),
            (Ok(a), Err(_)) => {
                let c = centre.get_or_insert_with(|| score(theta)).clone()?;
                (a - c) / h
            }
            (Err(_), Ok(b)) => {
                let c = centre.get_or_insert_with(|| score(theta)).clone()?;
                (c - b) / h
            }
            (Err(e), Err(_)) => return Err(e),
        };
        out.set_column(i, &col);
    }
    Ok(out)
}
