use crate::rng::stream_rng;
use rand::Rng;
use rand_distr::StandardNormal;

/// H frozen paths of standard-normal draws, each T × k, plus one reserved
/// draw per path for the stationary initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationBank {
    pub seed: u64,
    pub h: usize,
    pub t: usize,
    pub k: usize,
    draws: Vec<Vec<f64>>,
    init: Vec<f64>,
}

/// Borrowed view of a single path: row-major `t × k` draws.
#[derive(Debug, Clone, Copy)]
pub struct BankPath<'a> {
    pub draws: &'a [f64],
    pub k: usize,
    pub init: f64,
}

impl<'a> BankPath<'a> {
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.draws.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get(&self, t: usize, col: usize) -> f64 {
        self.draws[t * self.k + col]
    }
}

/// Path `p` comes from stream `p` of the seed, so each path can be generated
/// independently and the bank is bit-reproducible.
pub fn draw_innovation_bank(h: usize, t: usize, k: usize, seed: u64) -> InnovationBank {
    assert!(h >= 1 && t >= 1 && k >= 1, "bank needs H, T, k >= 1");
    let (draws, init): (Vec<_>, Vec<_>) = (0..h)
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            let init: f64 = rng.sample(StandardNormal);
            let d: Vec<f64> = (0..t * k).map(|_| rng.sample(StandardNormal)).collect();
            (d, init)
        })
        .unzip();
    InnovationBank { seed, h, t, k, draws, init }
}

impl InnovationBank {
    pub fn path(&self, p: usize) -> BankPath<'_> {
        BankPath { draws: &self.draws[p], k: self.k, init: self.init[p] }
    }

    pub fn paths(&self) -> impl Iterator<Item = BankPath<'_>> {
        (0..self.h).map(move |p| self.path(p))
    }

    /// Column `col` of path `p` as an owned vector.
    pub fn column(&self, p: usize, col: usize) -> Vec<f64> {
        self.draws[p].iter().skip(col).step_by(self.k).copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(draw_innovation_bank(3, 50, 2, 9), draw_innovation_bank(3, 50, 2, 9));
        assert_ne!(draw_innovation_bank(1, 50, 2, 9), draw_innovation_bank(1, 50, 2, 10));
    }

    #[test]
    fn moments_and_independence() {
        let t = 100_000;
        let b = draw_innovation_bank(2, t, 2, 123);
        for p in 0..2 {
            for c in 0..2 {
                let x = b.column(p, c);
                let m = x.iter().sum::<f64>() / t as f64;
                let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / t as f64;
                assert!(m.abs() < 0.01, "mean {m}");
                assert!((v - 1.0).abs() < 0.01, "var {v}");
            }
        }
        let a = b.column(0, 0);
        let c = b.column(1, 0);
        let r = a.iter().zip(&c).map(|(x, y)| x * y).sum::<f64>() / t as f64;
        assert!(r.abs() < 0.02, "cross correlation {r}");
    }
}
