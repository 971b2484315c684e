//! Exact transition of the Feller diffusion `dX = r X dt + sqrt(2 γ X) dB`.
//!
//! Over a step `h` the Laplace transform is `exp(-x λ e^{rh} / (1 + λ c_h))`
//! with `c_h = γ (e^{rh} - 1) / r`, i.e. a Poisson(`x e^{rh} / c_h`) number of
//! Exponential(mean `c_h`) clusters. Zero clusters is absorption.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::stable::poisson;

/// `γ (e^{rh} - 1) / r`, continuous at `r = 0`.
#[must_use]
pub fn cluster_scale(r: f64, gamma: f64, h: f64) -> f64 {
    if (r * h).abs() < 1e-10 {
        gamma * h * (1.0 + 0.5 * r * h)
    } else {
        gamma * (r * h).exp_m1() / r
    }
}

/// One exact step. `gamma = 0` reduces to deterministic growth.
pub fn feller_step<R: Rng + ?Sized>(x: f64, r: f64, gamma: f64, h: f64, rng: &mut R) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if h <= 0.0 {
        return x;
    }
    if gamma == 0.0 {
        return x * (r * h).exp();
    }
    let c = cluster_scale(r, gamma, h);
    let n = poisson(x * (r * h).exp() / c, rng);
    if n == 0 {
        return 0.0;
    }
    Gamma::new(n as f64, c).map(|g| g.sample(rng)).unwrap_or(0.0)
}

/// Probability that the exact step from `x` ends at 0.
#[must_use]
pub fn step_absorption_prob(x: f64, r: f64, gamma: f64, h: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    (-x * (r * h).exp() / cluster_scale(r, gamma, h)).exp()
}
