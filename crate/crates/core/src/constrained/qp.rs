//! Primal active-set solver for small strictly concave quadratic programs
//!
//! maximize `s'd + d'Bd/2` subject to `G_i d >= r_i` (inequalities) and
//! `G_i d = r_i` (equalities), starting from the feasible point `d = 0`.

use crate::error::{IndiiError, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct QpProblem<'a> {
    /// Negative definite curvature.
    pub b: &'a DMatrix<f64>,
    pub s: &'a DVector<f64>,
    /// One row per constraint.
    pub g: &'a DMatrix<f64>,
    pub r: &'a DVector<f64>,
    pub equality: &'a [bool],
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub d: DVector<f64>,
    /// Multipliers with `s + B d + G' mu = 0`; zero outside the working set.
    pub mu: DVector<f64>,
    pub working: Vec<usize>,
    pub iterations: usize,
}

const STEP_TOL: f64 = 1e-13;

fn solve_eqp(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    g: &DMatrix<f64>,
    working: &[usize],
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = b.nrows();
    let m = working.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(b);
    for (w, &i) in working.iter().enumerate() {
        for j in 0..n {
            k[(n + w, j)] = g[(i, j)];
            k[(j, n + w)] = g[(i, j)];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-grad));
    let sol = k
        .lu()
        .solve(&rhs)
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .ok_or_else(|| IndiiError::SingularMatrix("KKT matrix of the QP subproblem".into()))?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

pub fn solve_qp(p: &QpProblem<'_>) -> Result<QpSolution> {
    let n = p.s.len();
    let q = p.r.len();
    let mut d = DVector::zeros(n);
    let mut working: Vec<usize> = (0..q).filter(|&i| p.equality[i]).collect();
    let cap = 50 + 20 * (n + q);
    let scale = 1.0 + p.s.amax();
    for it in 0..cap {
        let grad = p.s + p.b * &d;
        let (step, mu_w) = solve_eqp(p.b, &grad, p.g, &working)?;
        if step.amax() <= STEP_TOL * (1.0 + d.amax()) {
            // stationary on the working set: check dual feasibility
            let mut worst: Option<(usize, f64)> = None;
            for (w, &i) in working.iter().enumerate() {
                if !p.equality[i] && mu_w[w] < -1e-12 * scale && worst.map_or(true, |(_, v)| mu_w[w] < v) {
                    worst = Some((w, mu_w[w]));
                }
            }
            match worst {
                Some((w, _)) => {
                    working.remove(w);
                }
                None => {
                    let mut mu = DVector::zeros(q);
                    for (w, &i) in working.iter().enumerate() {
                        mu[i] = if p.equality[i] { mu_w[w] } else { mu_w[w].max(0.0) };
                    }
                    return Ok(QpSolution { d, mu, working, iterations: it + 1 });
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..q {
            if p.equality[i] || working.contains(&i) {
                continue;
            }
            let gp = p.g.row(i).dot(&step.transpose());
            if gp < 0.0 {
                let room = (p.r[i] - p.g.row(i).dot(&d.transpose())) / gp;
                let room = room.max(0.0);
                if room < alpha {
                    alpha = room;
                    blocking = Some(i);
                }
            }
        }
        d += &step * alpha;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    Err(IndiiError::NoConvergence { iterations: cap, reason: "active-set QP cycling".into() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_qp() {
        // max -(d - (-1, 2))^2 / 2 s.t. d1 >= 0
        let b = -DMatrix::identity(2, 2);
        let s = DVector::from_vec(vec![-1.0, 2.0]);
        let g = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r = DVector::from_vec(vec![0.0]);
        let sol = solve_qp(&QpProblem { b: &b, s: &s, g: &g, r: &r, equality: &[false] }).unwrap();
        assert!((sol.d - DVector::from_vec(vec![0.0, 2.0])).amax() < 1e-14);
        assert!((sol.mu[0] - 1.0).abs() < 1e-14);
    }
}
