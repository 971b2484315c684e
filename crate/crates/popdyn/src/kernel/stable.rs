//! Symmetric α-stable Lévy process with Lévy measure `|h|^{-1-α} dh`.
//!
//! Jumps with `|h| >= 1` are sampled exactly. Jumps in `(ε, 1)` are sampled
//! exactly too; by symmetry their compensator vanishes. Jumps below `ε` are
//! dropped, which removes variance `2 ε^{2-α} / (2-α)` per unit time; with
//! `gaussian_correction` that variance is put back as a Brownian term.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::sde::Path;
use crate::error::{ensure, invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableSpec {
    pub alpha: f64,
    pub epsilon: f64,
    pub gaussian_correction: bool,
}

impl StableSpec {
    pub fn new(alpha: f64, epsilon: f64, gaussian_correction: bool) -> Result<Self> {
        ensure(alpha > 0.0 && alpha < 2.0, "alpha", "must lie in (0, 2)")?;
        ensure(epsilon > 0.0 && epsilon < 1.0, "epsilon", "must lie in (0, 1)")?;
        Ok(Self {
            alpha,
            epsilon,
            gaussian_correction,
        })
    }

    /// Rate of jumps with `|h| >= 1`.
    #[must_use]
    pub fn big_rate(&self) -> f64 {
        2.0 / self.alpha
    }

    /// Rate of jumps with `ε < |h| < 1`.
    #[must_use]
    pub fn small_rate(&self) -> f64 {
        2.0 * (self.epsilon.powf(-self.alpha) - 1.0) / self.alpha
    }

    /// Variance per unit time of the discarded jumps below `ε`.
    #[must_use]
    pub fn dropped_variance(&self) -> f64 {
        2.0 * self.epsilon.powf(2.0 - self.alpha) / (2.0 - self.alpha)
    }

    fn big_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        let m = u.powf(-1.0 / self.alpha);
        if rng.random::<bool>() { m } else { -m }
    }

    fn small_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let a = self.epsilon.powf(-self.alpha);
        let u: f64 = rng.random();
        let m = (a - u * (a - 1.0)).powf(-1.0 / self.alpha);
        if rng.random::<bool>() { m } else { -m }
    }

    /// Increment over a time interval of length `dt`.
    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        let mut s = 0.0;
        let nb = poisson(self.big_rate() * dt, rng);
        for _ in 0..nb {
            s += self.big_jump(rng);
        }
        let ns = poisson(self.small_rate() * dt, rng);
        for _ in 0..ns {
            s += self.small_jump(rng);
        }
        if self.gaussian_correction {
            let z: f64 = StandardNormal.sample(rng);
            s += (self.dropped_variance() * dt).sqrt() * z;
        }
        s
    }
}

pub(crate) fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|d| d.sample(rng) as u64).unwrap_or(0)
}

/// Path of the truncated symmetric stable process on the grid `k * step`.
pub fn simulate_stable_symmetric<R: Rng>(spec: &StableSpec, horizon: f64, step: f64, rng: &mut R) -> Result<Path> {
    if !(step > 0.0) {
        return Err(invalid("step", "must be positive"));
    }
    ensure(horizon >= 0.0 && horizon.is_finite(), "horizon", "must be non-negative")?;
    let mut path = Path::default();
    path.push(0.0, 0.0);
    let n = (horizon / step).ceil() as usize;
    let mut s = 0.0;
    let mut t = 0.0;
    for k in 1..=n {
        let tk = (k as f64 * step).min(horizon);
        s += spec.increment(tk - t, rng);
        t = tk;
        path.push(t, s);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rng::RngStream;
    use crate::stats::ks_two_sample;

    #[test]
    fn rejects_bad_alpha() {
        assert!(StableSpec::new(2.0, 0.1, false).is_err());
        assert!(StableSpec::new(0.0, 0.1, false).is_err());
        assert!(StableSpec::new(1.5, 1.0, false).is_err());
    }

    #[test]
    fn zero_horizon() {
        let s = StableSpec::new(1.5, 0.1, false).unwrap();
        let p = simulate_stable_symmetric(&s, 0.0, 0.1, &mut RngStream::new(1, 0).rng()).unwrap();
        assert_eq!(p.values, vec![0.0]);
    }

    #[test]
    fn symmetric_mean_zero() {
        let s = StableSpec::new(1.6, 0.05, false).unwrap();
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|i| s.increment(1.0, &mut RngStream::new(2, i).rng())).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(m.abs() < 3.0 * sd / (n as f64).sqrt(), "mean {m} sd {sd}");
    }

    #[test]
    fn self_similar() {
        let alpha = 1.5;
        let s = StableSpec::new(alpha, 0.02, true).unwrap();
        let n = 4000;
        let a: Vec<f64> = (0..n).map(|i| s.increment(2.0, &mut RngStream::new(3, i).rng())).collect();
        let c = 2f64.powf(1.0 / alpha);
        let b: Vec<f64> = (0..n).map(|i| c * s.increment(1.0, &mut RngStream::new(4, i).rng())).collect();
        let ks = ks_two_sample(&a, &b);
        assert!(ks.p_value > 0.01, "{ks:?}");
    }
}
