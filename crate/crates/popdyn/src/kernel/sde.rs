//! Euler-Maruyama for jump SDEs of the form
//! `dX = b(X)dt + s(X)dB + ∫G(X-,h)N(dt,dh) + ∫K(X-,h)Ñ(dt,dh)`
//! with finite-activity (already truncated) mark intensities.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ppm::{sample_ppm, MarkIntensity};
use crate::error::{ensure, Result};

pub type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
pub type KernelFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
pub type MarkSampler = Box<dyn Fn(&mut dyn rand::RngCore) -> f64 + Send + Sync>;

/// What happens when the state reaches the edge of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Real,
    /// `[0, ∞)` with 0 absorbing: a state `<= 0` after a step becomes exactly 0 and stays there.
    NonNegative,
}

/// Finite jump part: marks at rate `rate`, drawn by `sampler`, kernel `kernel(x, h)`.
pub struct JumpPart {
    pub rate: f64,
    pub sampler: MarkSampler,
    pub kernel: KernelFn,
}

/// Compensated jump part; `compensator(x) = ∫ K(x,h) ν(dh)` is subtracted as drift.
pub struct CompensatedPart {
    pub jumps: JumpPart,
    pub compensator: ScalarFn,
}

pub struct JumpSdeSpec {
    pub drift: ScalarFn,
    pub diffusion: ScalarFn,
    pub jumps: Option<JumpPart>,
    pub compensated: Option<CompensatedPart>,
    pub domain: Domain,
    /// `|x|` above this counts as explosion.
    pub max_abs: f64,
}

impl JumpSdeSpec {
    /// `b(x)`, `s(x)` only, no jumps.
    pub fn diffusion(drift: ScalarFn, diffusion: ScalarFn, domain: Domain) -> Self {
        Self {
            drift,
            diffusion,
            jumps: None,
            compensated: None,
            domain,
            max_abs: 1e300,
        }
    }

    /// Full-truncation square-root coefficient `sqrt(2 γ max(x, 0))`.
    pub fn sqrt_diffusion(gamma: f64) -> ScalarFn {
        Box::new(move |x: f64| (2.0 * gamma * x.max(0.0)).sqrt())
    }
}

/// Piecewise record of a simulated path.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Path {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub absorbed_at: Option<f64>,
    pub exploded_at: Option<f64>,
}

impl Path {
    pub fn push(&mut self, t: f64, x: f64) {
        self.times.push(t);
        self.values.push(x);
    }

    #[must_use]
    pub fn last(&self) -> f64 {
        *self.values.last().unwrap_or(&f64::NAN)
    }

    /// Value at time `t` (right-continuous lookup on the record).
    #[must_use]
    pub fn value_at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => self.values.first().copied().unwrap_or(f64::NAN),
            i => self.values[i - 1],
        }
    }
}

fn clamp(domain: Domain, x: f64) -> (f64, bool) {
    match domain {
        Domain::NonNegative if x <= 0.0 => (0.0, true),
        _ => (x, false),
    }
}

/// Euler-Maruyama between jumps, jumps applied atomically at their sampled times.
/// Records the state at every grid time and right after every jump.
pub fn integrate_jump_sde<R: Rng>(spec: &JumpSdeSpec, x0: f64, horizon: f64, step: f64, rng: &mut R) -> Result<Path> {
    ensure(step > 0.0 && step.is_finite(), "step", "must be positive")?;
    ensure(horizon >= 0.0 && horizon.is_finite(), "horizon", "must be non-negative")?;

    // Both jump parts are state-independent in intensity, so their point sets are drawn up front.
    let mut events: Vec<(f64, f64, bool)> = Vec::new();
    for (part, compensated) in [(spec.jumps.as_ref(), false), (spec.compensated.as_ref().map(|c| &c.jumps), true)] {
        if let Some(p) = part {
            let intensity = MarkIntensity::new(p.rate, |r: &mut dyn rand::RngCore| (p.sampler)(r))?;
            let s = sample_ppm(&intensity, horizon, rng)?;
            events.extend(s.times.into_iter().zip(s.marks).map(|(t, h)| (t, h, compensated)));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut path = Path::default();
    let (mut x, dead) = clamp(spec.domain, x0);
    let mut t = 0.0;
    path.push(t, x);
    if dead {
        path.absorbed_at = Some(0.0);
        return Ok(path);
    }
    let n_steps = (horizon / step).ceil() as usize;
    let mut ev = events.into_iter().peekable();
    let euler = |x: f64, dt: f64, rng: &mut R| -> f64 {
        if dt <= 0.0 {
            return x;
        }
        let mut drift = (spec.drift)(x);
        if let Some(c) = &spec.compensated {
            drift -= (c.compensator)(x);
        }
        let z: f64 = StandardNormal.sample(rng);
        x + drift * dt + (spec.diffusion)(x) * dt.sqrt() * z
    };
    for k in 1..=n_steps {
        let t_grid = (k as f64 * step).min(horizon);
        while let Some((tj, h, comp)) = ev.next_if(|e| e.0 <= t_grid) {
            x = euler(x, tj - t, rng);
            t = tj;
            if let Some(done) = check(spec, &mut path, &mut x, t) {
                return Ok(done);
            }
            let part = if comp {
                &spec.compensated.as_ref().expect("compensated part").jumps
            } else {
                spec.jumps.as_ref().expect("jump part")
            };
            x += (part.kernel)(x, h);
            if let Some(done) = check(spec, &mut path, &mut x, t) {
                return Ok(done);
            }
            path.push(t, x);
        }
        x = euler(x, t_grid - t, rng);
        t = t_grid;
        if let Some(done) = check(spec, &mut path, &mut x, t) {
            return Ok(done);
        }
        path.push(t, x);
    }
    Ok(path)
}

fn check(spec: &JumpSdeSpec, path: &mut Path, x: &mut f64, t: f64) -> Option<Path> {
    if !x.is_finite() || x.abs() > spec.max_abs {
        path.exploded_at = Some(t);
        return Some(std::mem::take(path));
    }
    let (y, dead) = clamp(spec.domain, *x);
    *x = y;
    if dead && path.absorbed_at.is_none() {
        path.push(t, 0.0);
        path.absorbed_at = Some(t);
        return Some(std::mem::take(path));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::rng::RngStream;

    #[test]
    fn constant_path() {
        let spec = JumpSdeSpec::diffusion(Box::new(|_| 0.0), Box::new(|_| 0.0), Domain::Real);
        let p = integrate_jump_sde(&spec, 1.0, 2.0, 0.1, &mut RngStream::new(0, 0).rng()).unwrap();
        assert!(p.values.iter().all(|&v| v == 1.0));
        assert!((p.times.last().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_growth() {
        let r = 0.7;
        let spec = JumpSdeSpec::diffusion(Box::new(move |x| r * x), Box::new(|_| 0.0), Domain::Real);
        for step in [1e-2, 1e-3] {
            let p = integrate_jump_sde(&spec, 2.0, 1.0, step, &mut RngStream::new(0, 0).rng()).unwrap();
            let exact = 2.0 * (r as f64).exp();
            // forward Euler error is about x0 r^2 t e^{rt} step / 2
            assert!((p.last() - exact).abs() < 2.0 * r * r * exact * step, "step {step}");
        }
    }

    #[test]
    fn poisson_counts() {
        let spec = JumpSdeSpec {
            jumps: Some(JumpPart {
                rate: 1.0,
                sampler: Box::new(|_| 1.0),
                kernel: Box::new(|_, h| h),
            }),
            ..JumpSdeSpec::diffusion(Box::new(|_| 0.0), Box::new(|_| 0.0), Domain::Real)
        };
        let n = 10_000;
        let t = 3.0;
        let xs: Vec<f64> = (0..n)
            .map(|i| integrate_jump_sde(&spec, 0.0, t, 0.05, &mut RngStream::new(5, i).rng()).unwrap().last())
            .collect();
        assert!(xs.iter().all(|x| x.fract() == 0.0));
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - t).abs() < 4.0 * (t / n as f64).sqrt());
        assert!((v - t).abs() < 0.1 * t);
    }

    #[test]
    fn absorbed_state_is_exact_zero() {
        let spec = JumpSdeSpec::diffusion(Box::new(|_| -5.0), JumpSdeSpec::sqrt_diffusion(1.0), Domain::NonNegative);
        let p = integrate_jump_sde(&spec, 0.1, 5.0, 0.01, &mut RngStream::new(1, 0).rng()).unwrap();
        assert!(p.absorbed_at.is_some());
        assert_eq!(p.last(), 0.0);
    }
}
