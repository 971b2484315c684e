//! Rescaled birth-death families `X^K = Z^K / K` and their limits: the
//! deterministic ODE, the logistic Feller diffusion and the logistic diffusion
//! in a Brownian environment.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bd::{simulate_bd_with, BdOptions, RateSpec};
use crate::error::{ensure, Result};
use crate::kernel::{integrate_jump_sde, replicate, Domain, JumpSdeSpec, Path};
use crate::stats::Summary;

/// Values on a time grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GridPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Diffusion path with its absorption time, if any.
pub type DiffusionPath = Path;

/// RK4 for `x' = x (λ(x) - μ(x))` with per-capita rates `λ`, `μ`.
pub fn integrate_limit_ode(
    lambda: &dyn Fn(f64) -> f64,
    mu: &dyn Fn(f64) -> f64,
    x0: f64,
    horizon: f64,
    step: f64,
) -> Result<GridPath> {
    ensure(step > 0.0 && step.is_finite(), "step", "must be positive")?;
    ensure(horizon >= 0.0, "horizon", "must be non-negative")?;
    let f = |x: f64| x * (lambda(x) - mu(x));
    let n = (horizon / step).ceil() as usize;
    let mut out = GridPath { times: vec![0.0], values: vec![x0] };
    let mut x = x0;
    let mut t = 0.0;
    for k in 1..=n {
        let tk = (k as f64 * step).min(horizon);
        let h = tk - t;
        let k1 = f(x);
        let k2 = f(x + 0.5 * h * k1);
        let k3 = f(x + 0.5 * h * k2);
        let k4 = f(x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = tk;
        out.times.push(t);
        out.values.push(x);
    }
    Ok(out)
}

/// Carrying capacity `(λ - μ) / c` of the logistic ODE.
#[must_use]
pub fn carrying_capacity(lambda: f64, mu: f64, c: f64) -> f64 {
    (lambda - mu) / c
}

/// Logistic ODE `x' = x (λ - μ - c x)` on a grid.
pub fn logistic_ode(lambda: f64, mu: f64, c: f64, x0: f64, horizon: f64, step: f64) -> Result<GridPath> {
    integrate_limit_ode(&|_| lambda, &|x| mu + c * x, x0, horizon, step)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticFeller {
    pub gamma: f64,
    pub lambda: f64,
    pub mu: f64,
    pub c: f64,
}

impl LogisticFeller {
    pub fn validate(&self) -> Result<()> {
        ensure(self.gamma >= 0.0, "gamma", "must be non-negative")?;
        ensure(self.c >= 0.0, "c", "must be non-negative")
    }

    pub fn sde(&self) -> JumpSdeSpec {
        let (l, m, c) = (self.lambda, self.mu, self.c);
        JumpSdeSpec::diffusion(
            Box::new(move |x| x * (l - m - c * x)),
            JumpSdeSpec::sqrt_diffusion(self.gamma),
            Domain::NonNegative,
        )
    }
}

/// `dX = sqrt(2γX) dB + X (λ - μ - cX) dt`, Euler with full truncation and absorption at 0.
pub fn simulate_logistic_feller<R: Rng>(p: &LogisticFeller, x0: f64, horizon: f64, step: f64, rng: &mut R) -> Result<DiffusionPath> {
    p.validate()?;
    integrate_jump_sde(&p.sde(), x0, horizon, step, rng)
}

/// Family of birth-death chains indexed by `K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaledFamily {
    /// `λ_K(n) = n λ`, `μ_K(n) = n (μ + c n / K)`.
    Deterministic { lambda: f64, mu: f64, c: f64 },
    /// `λ_K(n) = n (γ K + λ)`, `μ_K(n) = n (γ K + μ + c n / K)`.
    Accelerated { gamma: f64, lambda: f64, mu: f64, c: f64 },
}

impl ScaledFamily {
    pub fn rates(&self, k: u64) -> Result<RateSpec> {
        let kf = k as f64;
        let (g, l, m, c) = match *self {
            Self::Deterministic { lambda, mu, c } => (0.0, lambda, mu, c),
            Self::Accelerated { gamma, lambda, mu, c } => {
                ensure(lambda > mu, "lambda", "accelerated regime assumes λ > μ")?;
                (gamma, lambda, mu, c)
            }
        };
        ensure(k >= 1, "K", "must be at least 1")?;
        RateSpec::new(
            format!("{self:?} K={k}"),
            Arc::new(move |n| n as f64 * (g * kf + l)),
            Arc::new(move |n| {
                let x = n as f64;
                x * (g * kf + m + c * x / kf)
            }),
            None,
        )
    }

    /// Limit ODE parameters `(λ, μ, c)`.
    #[must_use]
    pub fn drift(&self) -> (f64, f64, f64) {
        match *self {
            Self::Deterministic { lambda, mu, c } | Self::Accelerated { lambda, mu, c, .. } => (lambda, mu, c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessRow {
    pub k: u64,
    pub distance: f64,
    pub stderr: f64,
}

/// `E sup_{t on grid} |X^K_t - x(t)|` per `K` by Monte Carlo.
pub fn convergence_harness(
    family: &ScaledFamily,
    k_grid: &[u64],
    x0: f64,
    horizon: f64,
    grid_step: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<HarnessRow>> {
    ensure(replicates >= 2, "replicates", "need at least 2")?;
    let (l, m, c) = family.drift();
    let fine = grid_step / 20.0;
    let ode = logistic_ode(l, m, c, x0, horizon, fine)?;
    let n_grid = (horizon / grid_step).round() as usize;
    let limit: Vec<f64> = (0..=n_grid).map(|i| ode.values[(i * 20).min(ode.values.len() - 1)]).collect();
    let mut rows = Vec::new();
    for (idx, &k) in k_grid.iter().enumerate() {
        let spec = family.rates(k)?;
        let z0 = (x0 * k as f64).round() as u64;
        let dists = replicate(seed ^ (idx as u64) << 40, replicates, |s| {
            let mut grid = vec![0u64; n_grid + 1];
            let mut next = 1usize;
            let mut z = z0;
            grid[0] = z0;
            simulate_bd_with(&spec, z0, horizon, &BdOptions::default(), &mut s.rng(), |_, _, _| {}, |t, nz| {
                while next <= n_grid && (next as f64) * grid_step < t {
                    grid[next] = z;
                    next += 1;
                }
                z = nz;
            });
            for g in grid.iter_mut().skip(next) {
                *g = z;
            }
            grid.iter()
                .zip(&limit)
                .map(|(&zz, &x)| (zz as f64 / k as f64 - x).abs())
                .fold(0.0, f64::max)
        });
        let s = Summary::of(&dists);
        rows.push(HarnessRow { k, distance: s.mean, stderr: s.stderr });
    }
    Ok(rows)
}

/// Euler path and exact path of `dY = Y (r - cY) dt + σ Y dW` on shared noise.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RandomEnvPaths {
    pub times: Vec<f64>,
    pub numeric: Vec<f64>,
    pub exact: Vec<f64>,
}

/// Both paths from given Brownian increments over steps of length `step`.
/// The exact solution is `Y_t = Y_0 e^{X_t} / (1 + c Y_0 ∫_0^t e^{X_s} ds)` with
/// `X_t = (r - σ²/2) t + σ W_t`, evaluated as `1 / (e^{-X_t}/Y_0 + c J_t)` where
/// `J_t = ∫_0^t e^{X_s - X_t} ds` is updated multiplicatively (trapezoid in `s`).
pub fn random_env_from_increments(r: f64, c: f64, sigma: f64, y0: f64, step: f64, dw: &[f64]) -> Result<RandomEnvPaths> {
    ensure(y0 > 0.0, "y0", "must be positive")?;
    ensure(step > 0.0, "step", "must be positive")?;
    ensure(c >= 0.0 && sigma >= 0.0, "c", "c and σ must be non-negative")?;
    let n = dw.len();
    let mut out = RandomEnvPaths {
        times: Vec::with_capacity(n + 1),
        numeric: Vec::with_capacity(n + 1),
        exact: Vec::with_capacity(n + 1),
    };
    out.times.push(0.0);
    out.numeric.push(y0);
    out.exact.push(y0);
    let mut y = y0;
    let mut emx = 1.0; // e^{-X_t}
    let mut j = 0.0;
    let drift = r - 0.5 * sigma * sigma;
    for (k, &w) in dw.iter().enumerate() {
        y = (y + y * (r - c * y) * step + sigma * y * w).max(0.0);
        let dx = drift * step + sigma * w;
        let e = (-dx).exp();
        j = e * (j + 0.5 * step * (1.0 + 1.0 / e));
        emx *= e;
        out.times.push((k + 1) as f64 * step);
        out.numeric.push(y);
        out.exact.push(1.0 / (emx / y0 + c * j));
    }
    Ok(out)
}

pub fn random_env_paths<R: Rng>(r: f64, c: f64, sigma: f64, y0: f64, horizon: f64, step: f64, rng: &mut R) -> Result<RandomEnvPaths> {
    ensure(step > 0.0, "step", "must be positive")?;
    let n = (horizon / step).round() as usize;
    let sq = step.sqrt();
    let dw: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sq * z
        })
        .collect();
    random_env_from_increments(r, c, sigma, y0, step, &dw)
}

/// Shape and scale of the stationary Gamma law, when `r - σ²/2 > 0`.
#[must_use]
pub fn stationary_gamma(r: f64, c: f64, sigma: f64) -> Option<(f64, f64)> {
    if r - 0.5 * sigma * sigma > 0.0 {
        Some((2.0 * r / (sigma * sigma) - 1.0, sigma * sigma / (2.0 * c)))
    } else {
        None
    }
}

/// Pooled post-burn-in mean and variance of the exact solution across replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryEstimate {
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn stationary_moments(
    r: f64,
    c: f64,
    sigma: f64,
    y0: f64,
    horizon: f64,
    step: f64,
    burn_in_fraction: f64,
    replicates: usize,
    seed: u64,
) -> Result<StationaryEstimate> {
    ensure(replicates >= 2, "replicates", "need at least 2")?;
    let per: Vec<Result<(f64, f64)>> = replicate(seed, replicates, |s| {
        let p = random_env_paths(r, c, sigma, y0, horizon, step, &mut s.rng())?;
        let start = (burn_in_fraction * p.exact.len() as f64) as usize;
        let tail = &p.exact[start..];
        let n = tail.len() as f64;
        let m1 = tail.iter().sum::<f64>() / n;
        let m2 = tail.iter().map(|y| y * y).sum::<f64>() / n;
        Ok((m1, m2))
    });
    let per: Vec<(f64, f64)> = per.into_iter().collect::<Result<_>>()?;
    // Replicate time-averages are independent; the variance estimate is E[Y²] - E[Y]².
    let m1 = Summary::of(&per.iter().map(|p| p.0).collect::<Vec<_>>());
    let m2 = Summary::of(&per.iter().map(|p| p.1).collect::<Vec<_>>());
    let var = m2.mean - m1.mean * m1.mean;
    let var_se = (m2.stderr.powi(2) + (2.0 * m1.mean * m1.stderr).powi(2)).sqrt();
    Ok(StationaryEstimate { mean: m1.mean, mean_stderr: m1.stderr, variance: var, variance_stderr: var_se })
}
