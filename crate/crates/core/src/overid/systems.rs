use crate::error::{IndiiError, Result};
use crate::ii::ThetaBounds;
use crate::linalg::{require_pd, symmetrize};
use crate::rng::stream_rng;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Als,
    Gmm,
}

/// Observed input of a moment system: the nuisance estimate for ALS, raw draws for GMM.
#[derive(Debug, Clone, PartialEq)]
pub enum Sample {
    Sigma(DVector<f64>),
    Observations(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemModel {
    /// `g(beta, s) = Gamma beta - s`, `s(theta) = s0 + M (theta - theta0)`.
    LinearAls { gamma: DMatrix<f64>, sigma0: DVector<f64>, m: DMatrix<f64> },
    /// `g(beta, s) = Gamma0 t(beta) - s` with `t_k(b) = b_k + amp sin(b_k)`.
    TrigAls { gamma0: DMatrix<f64>, sigma0: DVector<f64>, m: DMatrix<f64>, amp: f64 },
    /// `y ~ N(theta, 1 + theta^2)`, `phi(beta) = (y - b1, y^2 - b1^2 - b2, (y - b1)^3)`.
    QuadraticGmm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    pub name: String,
    pub kind: SystemKind,
    pub model: SystemModel,
    pub beta0: DVector<f64>,
    pub theta0: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub gamma_theta: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

fn normal_matrix(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_pd(rng: &mut impl Rng, q: usize) -> DMatrix<f64> {
    let l = normal_matrix(rng, q, q) / (q as f64).sqrt();
    symmetrize(&(&l * l.transpose() + DMatrix::identity(q, q) * 0.5))
}

impl MomentSystem {
    pub fn q(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn d_beta(&self) -> usize {
        self.gamma.ncols()
    }

    pub fn d_theta(&self) -> usize {
        self.gamma_theta.ncols()
    }

    pub fn linear_als(
        gamma: DMatrix<f64>,
        m: DMatrix<f64>,
        v: DMatrix<f64>,
        beta0: DVector<f64>,
        theta0: DVector<f64>,
    ) -> Result<Self> {
        let q = gamma.nrows();
        if m.nrows() != q || v.nrows() != q || beta0.len() != gamma.ncols() || theta0.len() != m.ncols() {
            return Err(IndiiError::Dimension("linear ALS pieces do not conform".into()));
        }
        require_pd(&v, "V")?;
        let sigma0 = &gamma * &beta0;
        Ok(Self {
            name: "linear".into(),
            kind: SystemKind::Als,
            gamma_theta: -&m,
            model: SystemModel::LinearAls { gamma: gamma.clone(), sigma0, m },
            beta0,
            theta0,
            gamma,
            v,
        })
    }

    /// Random linear instance. Without `conflict`, `Gamma_theta` lies in span(Gamma).
    pub fn random_linear_als(seed: u64, q: usize, d_beta: usize, d_theta: usize, conflict: bool) -> Self {
        let mut rng = stream_rng(seed, 0);
        let gamma = normal_matrix(&mut rng, q, d_beta);
        let m = if conflict {
            normal_matrix(&mut rng, q, d_theta)
        } else {
            &gamma * normal_matrix(&mut rng, d_beta, d_theta)
        };
        let v = random_pd(&mut rng, q);
        let beta0 = DVector::from_fn(d_beta, |_, _| rng.sample::<f64, _>(StandardNormal));
        let theta0 = DVector::from_fn(d_theta, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::linear_als(gamma, m, v, beta0, theta0).expect("random instance conforms")
    }

    /// `q = 3`, `d_beta = 2`, `d_theta = 1`, `V = I`, `Gamma_theta = e1`, `Gamma = [e2, e3]`:
    /// the naive selection `Gamma' V^{-1}` discards every bit of information about theta.
    pub fn toy_counterexample() -> Self {
        let gamma = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let m = DMatrix::from_column_slice(3, 1, &[-1.0, 0.0, 0.0]);
        let mut s = Self::linear_als(gamma, m, DMatrix::identity(3, 3), DVector::from_vec(vec![1.0, 1.0]), DVector::zeros(1))
            .expect("toy conforms");
        s.name = "toy".into();
        s
    }

    pub fn nonlinear_als(seed: u64, q: usize, d_beta: usize, d_theta: usize) -> Self {
        let mut rng = stream_rng(seed, 1);
        let amp: f64 = 0.3;
        let gamma0 = normal_matrix(&mut rng, q, d_beta);
        let m = normal_matrix(&mut rng, q, d_theta);
        let v = random_pd(&mut rng, q);
        let beta0 = DVector::from_fn(d_beta, |_, _| rng.gen_range(-1.0f64..1.0));
        let theta0 = DVector::from_fn(d_theta, |_, _| rng.sample::<f64, _>(StandardNormal));
        let sigma0 = &gamma0 * beta0.map(|b: f64| b + amp * b.sin());
        let gamma = &gamma0 * DMatrix::from_diagonal(&beta0.map(|b: f64| 1.0 + amp * b.cos()));
        Self {
            name: "nonlinear".into(),
            kind: SystemKind::Als,
            gamma_theta: -&m,
            model: SystemModel::TrigAls { gamma0, sigma0, m, amp },
            beta0,
            theta0,
            gamma,
            v,
        }
    }

    pub fn quadratic_gmm(theta0: f64) -> Self {
        let s2 = 1.0 + theta0 * theta0;
        let t = theta0;
        let gamma = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, -2.0 * t, -1.0, -3.0 * s2, 0.0]);
        let gamma_theta = DMatrix::from_column_slice(3, 1, &[1.0, 4.0 * t, 3.0 * s2]);
        let v = DMatrix::from_row_slice(
            3,
            3,
            &[
                s2,
                2.0 * t * s2,
                3.0 * s2 * s2,
                2.0 * t * s2,
                4.0 * t * t * s2 + 2.0 * s2 * s2,
                6.0 * t * s2 * s2,
                3.0 * s2 * s2,
                6.0 * t * s2 * s2,
                15.0 * s2 * s2 * s2,
            ],
        );
        Self {
            name: "gmm".into(),
            kind: SystemKind::Gmm,
            model: SystemModel::QuadraticGmm,
            beta0: DVector::from_vec(vec![t, s2]),
            theta0: DVector::from_vec(vec![t]),
            gamma,
            gamma_theta,
            v,
        }
    }

    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        match name {
            "linear" => Ok(Self::random_linear_als(seed, 5, 3, 2, true)),
            "nonlinear" => Ok(Self::nonlinear_als(seed, 5, 3, 2)),
            "gmm" => Ok(Self::quadratic_gmm(0.5)),
            "toy" => Ok(Self::toy_counterexample()),
            other => Err(IndiiError::InvalidParameter(format!("unknown instance '{other}'"))),
        }
    }

    fn sigma_of(&self, sigma0: &DVector<f64>, m: &DMatrix<f64>, theta: &DVector<f64>) -> DVector<f64> {
        sigma0 + m * (theta - &self.theta0)
    }

    fn als_moments(&self, beta: &DVector<f64>, sigma: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        match &self.model {
            SystemModel::LinearAls { gamma, .. } => (gamma * beta - sigma, gamma.clone()),
            SystemModel::TrigAls { gamma0, amp, .. } => {
                let t = beta.map(|b| b + amp * b.sin());
                let jd = DMatrix::from_diagonal(&beta.map(|b| 1.0 + amp * b.cos()));
                (gamma0 * t - sigma, gamma0 * jd)
            }
            SystemModel::QuadraticGmm => unreachable!("not an ALS system"),
        }
    }

    /// Sample moments and their Jacobian in beta.
    pub fn sample_moments(&self, beta: &DVector<f64>, sample: &Sample) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if beta.len() != self.d_beta() {
            return Err(IndiiError::Dimension(format!("beta has {} entries, need {}", beta.len(), self.d_beta())));
        }
        match (&self.model, sample) {
            (SystemModel::QuadraticGmm, Sample::Observations(y)) => {
                if y.is_empty() {
                    return Err(IndiiError::Degenerate("empty sample".into()));
                }
                let n = y.len() as f64;
                let (b1, b2) = (beta[0], beta[1]);
                let (mut g, mut c2) = (DVector::zeros(3), 0.0);
                for &v in y {
                    let e = v - b1;
                    g[0] += e;
                    g[1] += v * v - b1 * b1 - b2;
                    g[2] += e * e * e;
                    c2 += e * e;
                }
                g /= n;
                let jac = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, -2.0 * b1, -1.0, -3.0 * c2 / n, 0.0]);
                Ok((g, jac))
            }
            (SystemModel::LinearAls { .. } | SystemModel::TrigAls { .. }, Sample::Sigma(s)) => {
                if s.len() != self.q() {
                    return Err(IndiiError::Dimension("nuisance estimate has the wrong length".into()));
                }
                Ok(self.als_moments(beta, s))
            }
            _ => Err(IndiiError::InvalidParameter("sample type does not match the system".into())),
        }
    }

    /// Population moments at structural value `theta` (the H = infinity limit).
    pub fn population_moments(&self, beta: &DVector<f64>, theta: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if theta.len() != self.d_theta() {
            return Err(IndiiError::Dimension("theta has the wrong length".into()));
        }
        match &self.model {
            SystemModel::LinearAls { sigma0, m, .. } | SystemModel::TrigAls { sigma0, m, .. } => {
                let s = self.sigma_of(sigma0, m, theta);
                Ok(self.als_moments(beta, &s))
            }
            SystemModel::QuadraticGmm => {
                let t = theta[0];
                let s2 = 1.0 + t * t;
                let (b1, b2) = (beta[0], beta[1]);
                let d = t - b1;
                let g = DVector::from_vec(vec![d, t * t + s2 - b1 * b1 - b2, d * d * d + 3.0 * d * s2]);
                let jac = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, -2.0 * b1, -1.0, -3.0 * d * d - 3.0 * s2, 0.0]);
                Ok((g, jac))
            }
        }
    }

    /// One sample of size `t` at `theta0`.
    pub fn draw_sample(&self, t: usize, rng: &mut impl Rng) -> Sample {
        match &self.model {
            SystemModel::LinearAls { sigma0, .. } | SystemModel::TrigAls { sigma0, .. } => {
                let l = self.v.clone().cholesky().expect("V is positive definite").l();
                let z = DVector::from_fn(self.q(), |_, _| rng.sample::<f64, _>(StandardNormal));
                Sample::Sigma(sigma0 + l * z / (t as f64).sqrt())
            }
            SystemModel::QuadraticGmm => {
                let th = self.theta0[0];
                let sd = (1.0 + th * th).sqrt();
                Sample::Observations((0..t).map(|_| th + sd * rng.sample::<f64, _>(StandardNormal)).collect())
            }
        }
    }

    /// `theta0 +- 3` in every coordinate.
    pub fn theta_bounds(&self) -> ThetaBounds {
        ThetaBounds {
            lo: self.theta0.iter().map(|t| t - 3.0).collect(),
            hi: self.theta0.iter().map(|t| t + 3.0).collect(),
        }
    }
}
