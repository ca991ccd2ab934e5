//! Special functions needed by the criteria: normal CDF helpers, trigamma,
//! and numerically stable pieces of the standardized Student-t log density.

use statrs::function::erf::erfc;
use statrs::function::gamma::{digamma, ln_gamma};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Inverse Mills ratio `phi(x) / Phi(x)`, accurate in the lower tail down to about -37.
#[inline]
pub fn mills(x: f64) -> f64 {
    norm_pdf(x) / norm_cdf(x)
}

/// Trigamma via upward recurrence and the asymptotic expansion for x >= 10.
pub fn trigamma(mut x: f64) -> f64 {
    assert!(x > 0.0, "trigamma needs x > 0");
    let mut acc = 0.0;
    while x < 10.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let z = 1.0 / (x * x);
    let series = 1.0 / x
        + z / 2.0
        + (z / x) * (1.0 / 6.0 - z * (1.0 / 30.0 - z * (1.0 / 42.0 - z * (1.0 / 30.0 - z * 5.0 / 66.0))));
    acc + series
}

// Even Bernoulli numbers B_2 .. B_20.
const BERNOULLI: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

const SERIES_ETA_MAX: f64 = 0.05;

/// `R(b) = lnG(b + 1/2) - lnG(b) - ln(b)/2` at `b = 1/(2 eta)` and its first two
/// derivatives with respect to eta.
fn r_of_eta(eta: f64) -> (f64, f64, f64) {
    if eta <= SERIES_ETA_MAX {
        // R = sum_n (2^{1-n} - 2) B_n / (n (n-1)) x^{n-1}, x = 2 eta
        let x = 2.0 * eta;
        let (mut r, mut r1, mut r2) = (0.0, 0.0, 0.0);
        for (i, &b) in BERNOULLI.iter().enumerate() {
            let n = 2 * (i + 1);
            let nf = n as f64;
            let c = (2f64.powi(1 - n as i32) - 2.0) * b / (nf * (nf - 1.0));
            let p = (n - 1) as i32;
            r += c * x.powi(p);
            r1 += c * (p as f64) * x.powi(p - 1) * 2.0;
            if p >= 2 {
                r2 += c * (p as f64) * ((p - 1) as f64) * x.powi(p - 2) * 4.0;
            }
        }
        (r, r1, r2)
    } else {
        let b = 0.5 / eta;
        let r = ln_gamma(b + 0.5) - ln_gamma(b) - 0.5 * b.ln();
        let rb = digamma(b + 0.5) - digamma(b) - 0.5 / b;
        let rbb = trigamma(b + 0.5) - trigamma(b) + 0.5 / (b * b);
        // db/deta = -1/(2 eta^2), d2b/deta2 = 1/eta^3
        let r1 = -rb / (2.0 * eta * eta);
        let r2 = rbb / (4.0 * eta.powi(4)) + rb / eta.powi(3);
        (r, r1, r2)
    }
}

/// Log normalizing constant `c(eta)` of the unit-variance Student-t with `1/eta`
/// degrees of freedom, with derivatives in eta.
pub fn student_log_const(eta: f64) -> (f64, f64, f64) {
    let (r, r1, r2) = r_of_eta(eta);
    let q = 1.0 - 2.0 * eta;
    (-0.5 * LN_2PI - 0.5 * q.ln() + r, 1.0 / q + r1, 2.0 / (q * q) + r2)
}

/// `ln(1 + x) / x`, equal to 1 at x = 0.
#[inline]
pub fn log1p_ratio(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        x.ln_1p() / x
    }
}

/// `(ln(1+x) - x/(1+x)) / x^2` and its derivative in x, for x >= 0.
pub fn phi2(x: f64) -> (f64, f64) {
    if x < 0.1 {
        // sum_{n>=2} (-1)^n (n-1)/n x^{n-2}
        let (mut v, mut d) = (0.0, 0.0);
        let mut xp = 1.0;
        for n in 2..=24 {
            let nf = n as f64;
            let s = if n % 2 == 0 { 1.0 } else { -1.0 };
            v += s * (nf - 1.0) / nf * xp;
            if n >= 3 {
                // derivative of x^{n-2} is (n-2) x^{n-3}; xp currently x^{n-2}
                d += s * (nf - 1.0) * (nf - 2.0) / nf * x.powi(n as i32 - 3);
            }
            xp *= x;
        }
        (v, d)
    } else {
        let p = x.ln_1p() - x / (1.0 + x);
        let v = p / (x * x);
        let d = 1.0 / (x * (1.0 + x) * (1.0 + x)) - 2.0 * p / (x * x * x);
        (v, d)
    }
}

/// Per-observation pieces of the standardized Student-t log density written in
/// `u = y^2 / h`: `f(u, eta) = c(eta) - m ln(1 + k u)`, `m = (1+eta)/(2 eta)`,
/// `k = eta/(1-2 eta)`. Returns (f, f_u, f_uu, f_eta, f_etaeta, f_ueta).
#[derive(Debug, Clone, Copy)]
pub struct StudentTerms {
    pub f: f64,
    pub f_u: f64,
    pub f_uu: f64,
    pub f_e: f64,
    pub f_ee: f64,
    pub f_ue: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StudentConst {
    eta: f64,
    q: f64,
    c: (f64, f64, f64),
}

impl StudentConst {
    pub fn new(eta: f64) -> Self {
        Self { eta, q: 1.0 - 2.0 * eta, c: student_log_const(eta) }
    }

    #[inline]
    pub fn terms(&self, u: f64) -> StudentTerms {
        let eta = self.eta;
        let q = self.q;
        let q2 = q * q;
        let x = eta * u / q;
        let opx = 1.0 + x;
        let mk = (1.0 + eta) / (2.0 * q);
        let f = self.c.0 - mk * u * log1p_ratio(x);
        let f_u = -mk / opx;
        let f_uu = mk * (eta / q) / (opx * opx);
        let (p2, p2d) = phi2(x);
        let xe = u / q2;
        let f_e = self.c.1 + p2 * u * u / (2.0 * q2) - 1.5 * u / (q2 * opx);
        let f_ee = self.c.2 + 0.5 * u * u * (p2d * xe / q2 + 4.0 * p2 / (q2 * q))
            - 1.5 * u * (4.0 / (q2 * q * opx) - xe / (q2 * opx * opx));
        let f_ue = -(1.5 / (q2 * opx) - mk * xe / (opx * opx));
        StudentTerms { f, f_u, f_uu, f_e, f_ee, f_ue }
    }
}
