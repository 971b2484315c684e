//! Feller diffusion hit by multiplicative catastrophes `Y -> θ Y` at rate
//! `τ(Y)`: simulation, quenched Laplace transforms, the absorption criterion
//! and the survival-decay regimes for constant rates.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{ensure, invalid, Error, Result};
use crate::kernel::feller::feller_step;
use crate::kernel::rng::tags;
use crate::kernel::{replicate, Path, RngStream};
use crate::numerics::bisect;
use crate::stats::linear_fit;

/// Law of the surviving fraction `F` on `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum FractionLaw {
    /// Atoms `(θ, p)`.
    Atoms(Vec<(f64, f64)>),
    Beta { a: f64, b: f64 },
}

impl FractionLaw {
    pub fn constant(theta: f64) -> Result<Self> {
        Self::atoms(vec![(theta, 1.0)])
    }

    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        ensure(!atoms.is_empty(), "fraction", "needs at least one atom")?;
        ensure(atoms.iter().all(|&(t, p)| t > 0.0 && t <= 1.0 && p >= 0.0), "fraction", "atoms need θ in (0, 1] and p >= 0")?;
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        ensure((total - 1.0).abs() < 1e-9, "fraction", "probabilities must sum to 1")?;
        ensure(atoms.iter().any(|&(t, p)| t < 1.0 && p > 0.0), "fraction", "P(F < 1) must be positive")?;
        Ok(Self::Atoms(atoms))
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        ensure(a > 0.0 && a.is_finite(), "fraction.a", "must be positive")?;
        ensure(b > 0.0 && b.is_finite(), "fraction.b", "must be positive")?;
        let law = Self::Beta { a, b };
        ensure(law.mean_log().is_finite(), "fraction", "E|log F| must be finite")?;
        Ok(law)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Atoms(a) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(t, p) in a {
                    acc += p;
                    if u < acc {
                        return t;
                    }
                }
                a[a.len() - 1].0
            }
            Self::Beta { a, b } => Beta::new(*a, *b).map(|d| d.sample(rng)).unwrap_or(1.0).max(f64::MIN_POSITIVE),
        }
    }

    /// `E F^χ`.
    #[must_use]
    pub fn mean_pow(&self, chi: f64) -> f64 {
        match self {
            Self::Atoms(a) => a.iter().map(|&(t, p)| p * t.powf(chi)).sum(),
            Self::Beta { a, b } => (ln_beta(a + chi, *b) - ln_beta(*a, *b)).exp(),
        }
    }

    /// `E F^χ log F`.
    #[must_use]
    pub fn mean_pow_log(&self, chi: f64) -> f64 {
        match self {
            Self::Atoms(a) => a.iter().map(|&(t, p)| p * t.powf(chi) * t.ln()).sum(),
            Self::Beta { a, b } => self.mean_pow(chi) * (digamma(a + chi) - digamma(a + b + chi)),
        }
    }

    #[must_use]
    pub fn mean(&self) -> f64 {
        self.mean_pow(1.0)
    }

    /// `E log F` (non-positive).
    #[must_use]
    pub fn mean_log(&self) -> f64 {
        self.mean_pow_log(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    Constant,
    NonDecreasing,
    NonIncreasing,
    Undeclared,
}

pub type RateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Catastrophe rate `τ(y)` with its declared shape and upper bound.
#[derive(Clone)]
pub struct CatastropheRate {
    pub tau: RateFn,
    pub shape: Monotonicity,
    pub bound: Option<f64>,
}

impl std::fmt::Debug for CatastropheRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatastropheRate").field("shape", &self.shape).field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl CatastropheRate {
    pub fn constant(tau: f64) -> Result<Self> {
        ensure(tau >= 0.0 && tau.is_finite(), "tau", "must be non-negative")?;
        Ok(Self { tau: Arc::new(move |_| tau), shape: Monotonicity::Constant, bound: Some(tau) })
    }

    pub fn state_dependent(tau: RateFn, shape: Monotonicity, bound: Option<f64>) -> Self {
        Self { tau, shape, bound }
    }

    fn constant_value(&self) -> Option<f64> {
        (self.shape == Monotonicity::Constant).then(|| (self.tau)(0.0))
    }
}

/// Log-spaced probe points on `[0, 1e12]` used for sup/inf of `τ`.
fn probe_grid() -> impl Iterator<Item = f64> {
    std::iter::once(0.0).chain((-120..=120).map(|k| 10f64.powf(f64::from(k) / 10.0)))
}

#[derive(Debug, Clone)]
pub struct CatastropheEnv {
    pub rate: CatastropheRate,
    pub fraction: FractionLaw,
}

impl CatastropheEnv {
    pub fn new(rate: CatastropheRate, fraction: FractionLaw) -> Self {
        Self { rate, fraction }
    }

    pub fn constant(tau: f64, fraction: FractionLaw) -> Result<Self> {
        Ok(Self::new(CatastropheRate::constant(tau)?, fraction))
    }
}

/// Catastrophe times and fractions with `K_t = r t + Σ_{T_k <= t} log F_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvPath {
    pub r: f64,
    pub times: Vec<f64>,
    pub fractions: Vec<f64>,
    pub horizon: f64,
}

impl EnvPath {
    #[must_use]
    pub fn k_at(&self, t: f64) -> f64 {
        let jumps: f64 = self.times.iter().zip(&self.fractions).take_while(|(s, _)| **s <= t).map(|(_, f)| f.ln()).sum();
        self.r * t + jumps
    }

    /// `∫_0^t e^{-K_s} ds`, exact on each inter-catastrophe interval.
    #[must_use]
    pub fn integral_exp_neg_k(&self, t: f64) -> f64 {
        let piece = |a: f64, b: f64, jumps: f64| {
            let h = b - a;
            let scale = (-jumps - self.r * a).exp();
            if self.r.abs() * h < 1e-12 {
                scale * h
            } else {
                scale * (-(-self.r * h).exp_m1()) / self.r
            }
        };
        let mut acc = 0.0;
        let mut a = 0.0;
        let mut jumps = 0.0;
        for (&s, &f) in self.times.iter().zip(&self.fractions) {
            if s > t {
                break;
            }
            acc += piece(a, s, jumps);
            jumps += f.ln();
            a = s;
        }
        acc + piece(a, t, jumps)
    }
}

/// Catastrophes at constant rate `τ` on `[0, horizon]`.
pub fn sample_env_path<R: Rng + ?Sized>(r: f64, tau: f64, fraction: &FractionLaw, horizon: f64, rng: &mut R) -> EnvPath {
    let mut env = EnvPath { r, times: Vec::new(), fractions: Vec::new(), horizon };
    if tau <= 0.0 {
        return env;
    }
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / tau;
        if t > horizon {
            return env;
        }
        env.times.push(t);
        env.fractions.push(fraction.sample(rng));
    }
}

#[derive(Debug, Clone)]
pub struct CatastropheRun {
    /// Values on the output grid.
    pub path: Path,
    /// Accepted catastrophes (all of them for constant rates).
    pub env: EnvPath,
}

/// Feller diffusion `dY = rY dt + sqrt(2γY) dB` moved by its exact transition
/// between events, with `Y <- θ Y` at catastrophes. Constant rates draw the
/// environment up front from its own sub-stream; state-dependent rates are
/// thinned against the declared bound.
pub fn simulate_catastrophe_diffusion(
    r: f64,
    gamma: f64,
    env: &CatastropheEnv,
    y0: f64,
    horizon: f64,
    step: f64,
    stream: &RngStream,
) -> Result<CatastropheRun> {
    ensure(y0 > 0.0, "y0", "must be positive")?;
    ensure(gamma >= 0.0, "gamma", "must be non-negative")?;
    ensure(step > 0.0, "step", "must be positive")?;
    let mut env_rng = stream.derive(tags::ENVIRONMENT).rng();
    let mut diff_rng = stream.derive(tags::DIFFUSION).rng();
    let mut aux_rng = stream.derive(tags::AUX).rng();
    let (candidates, bound) = match env.rate.constant_value() {
        Some(tau) => (sample_env_path(r, tau, &env.fraction, horizon, &mut env_rng), None),
        None => {
            let bound = env.rate.bound.ok_or_else(|| invalid("tau", "state-dependent rate needs a declared upper bound"))?;
            ensure(bound.is_finite() && bound >= 0.0, "tau.bound", "must be finite and non-negative")?;
            (sample_env_path(r, bound, &env.fraction, horizon, &mut env_rng), Some(bound))
        }
    };
    let mut hits = EnvPath { r, times: Vec::new(), fractions: Vec::new(), horizon };
    let mut path = Path::default();
    path.push(0.0, y0);
    let mut y = y0;
    let mut t = 0.0;
    let n = (horizon / step).ceil() as usize;
    let mut ci = 0;
    for k in 1..=n {
        let tk = (k as f64 * step).min(horizon);
        while ci < candidates.times.len() && candidates.times[ci] <= tk {
            let s = candidates.times[ci];
            y = feller_step(y, r, gamma, s - t, &mut diff_rng);
            t = s;
            let accept = match bound {
                None => true,
                Some(b) => {
                    let rate = (env.rate.tau)(y);
                    if rate > b * (1.0 + 1e-12) {
                        return Err(Error::BoundViolation { bound: "tau", detail: format!("τ({y}) = {rate} exceeds {b}") });
                    }
                    aux_rng.random::<f64>() * b < rate
                }
            };
            if accept {
                y *= candidates.fractions[ci];
                hits.times.push(s);
                hits.fractions.push(candidates.fractions[ci]);
            }
            ci += 1;
        }
        y = feller_step(y, r, gamma, tk - t, &mut diff_rng);
        t = tk;
        if y == 0.0 && path.absorbed_at.is_none() {
            path.absorbed_at = Some(t);
        }
        path.push(t, y);
    }
    Ok(CatastropheRun { path, env: hits })
}

/// `E[e^{-λ Ȳ_t} | K] = exp(-λ y0 / (γ λ ∫_0^t e^{-K_s} ds + 1))` for `Ȳ_t = e^{-K_t} Y_t`.
#[must_use]
pub fn quenched_laplace(gamma: f64, env: &EnvPath, y0: f64, lambda: f64, t: f64) -> f64 {
    let i = env.integral_exp_neg_k(t);
    (-lambda * y0 / (gamma * lambda * i + 1.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtinctionVerdict {
    AlmostSureAbsorption,
    SurvivalPossible,
    Undetermined,
}

/// Absorption criterion comparing `r` with `E log(1/F) · τ` for constant and
/// monotone rates.
pub fn extinction_criterion(r: f64, env: &CatastropheEnv) -> Result<ExtinctionVerdict> {
    use ExtinctionVerdict::*;
    let m = -env.fraction.mean_log();
    let tau = &env.rate.tau;
    Ok(match env.rate.shape {
        Monotonicity::Constant => {
            if r <= m * tau(0.0) { AlmostSureAbsorption } else { SurvivalPossible }
        }
        Monotonicity::NonDecreasing => {
            // A declared bound dominates sup τ; the grid alone can miss a limit at infinity.
            let grid_sup = probe_grid().map(|y| tau(y)).fold(f64::NEG_INFINITY, f64::max);
            let sup = env.rate.bound.map_or(grid_sup, |b| b.max(grid_sup));
            if probe_grid().any(|y| r <= m * tau(y)) {
                AlmostSureAbsorption
            } else if r > m * sup {
                SurvivalPossible
            } else {
                Undetermined
            }
        }
        Monotonicity::NonIncreasing => {
            let inf = probe_grid().map(|y| tau(y)).fold(f64::INFINITY, f64::min);
            if r <= m * inf { AlmostSureAbsorption } else { SurvivalPossible }
        }
        Monotonicity::Undeclared => return Err(invalid("tau", "monotonicity must be declared")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    StronglySubcritical,
    IntermediateSubcritical,
    WeaklySubcritical,
    Critical,
    Supercritical,
}

impl Regime {
    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            Self::StronglySubcritical => "strongly-subcritical",
            Self::IntermediateSubcritical => "intermediate-subcritical",
            Self::WeaklySubcritical => "weakly-subcritical",
            Self::Critical => "critical",
            Self::Supercritical => "supercritical",
        }
    }
}

/// Regime with predicted `P(Y_t > 0) ≈ c t^{poly} e^{exponent t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// `r - τ E log(1/F)`.
    pub drift_sign: f64,
    /// `τ E(F log F) + r`.
    pub slope_sign: f64,
    pub exponent: Option<f64>,
    pub poly_order: f64,
    pub chi: Option<f64>,
}

/// Survival-decay regime for constant `τ`. Equalities are decided with an
/// absolute tolerance of `1e-12`.
pub fn regime_classify(r: f64, tau: f64, fraction: &FractionLaw) -> Result<RegimeReport> {
    ensure(tau > 0.0, "tau", "must be positive")?;
    let tol = 1e-12;
    let drift = r + tau * fraction.mean_log();
    let slope = tau * fraction.mean_pow_log(1.0) + r;
    let base = r + tau * (fraction.mean() - 1.0);
    let mut rep = RegimeReport {
        regime: Regime::Supercritical,
        drift_sign: drift,
        slope_sign: slope,
        exponent: None,
        poly_order: 0.0,
        chi: None,
    };
    if drift.abs() <= tol {
        rep.regime = Regime::Critical;
        rep.exponent = Some(0.0);
        rep.poly_order = -0.5;
    } else if drift > 0.0 {
        rep.regime = Regime::Supercritical;
    } else if slope < -tol {
        rep.regime = Regime::StronglySubcritical;
        rep.exponent = Some(base);
    } else if slope.abs() <= tol {
        rep.regime = Regime::IntermediateSubcritical;
        rep.exponent = Some(base);
        rep.poly_order = -0.5;
    } else {
        let g = |chi: f64| tau * fraction.mean_pow_log(chi) + r;
        let (lo, hi) = (1e-6, 1.0 - 1e-6);
        if g(lo) * g(hi) > 0.0 {
            return Err(Error::Numerical(format!("χ not bracketed in (0, 1): g({lo}) = {}, g({hi}) = {}", g(lo), g(hi))));
        }
        let chi = bisect(&g, lo, hi, 1e-14)?;
        rep.regime = Regime::WeaklySubcritical;
        rep.chi = Some(chi);
        rep.exponent = Some(r + tau * (fraction.mean_pow(chi) - 1.0));
        rep.poly_order = -1.5;
    }
    Ok(rep)
}

/// Row of an empirical survival curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPoint {
    pub t: f64,
    pub p_hat: f64,
    pub stderr: f64,
}

/// Fraction of replicates above `threshold` at each grid time.
#[allow(clippy::too_many_arguments)]
pub fn survival_curve(
    r: f64,
    gamma: f64,
    env: &CatastropheEnv,
    y0: f64,
    horizon: f64,
    step: f64,
    threshold: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<SurvivalPoint>> {
    let runs = replicate(seed, replicates, |s| simulate_catastrophe_diffusion(r, gamma, env, y0, horizon, step, &s));
    let mut counts: Vec<usize> = Vec::new();
    let mut times: Vec<f64> = Vec::new();
    for run in runs {
        let run = run?;
        if times.is_empty() {
            times.clone_from(&run.path.times);
            counts = vec![0; times.len()];
        }
        for (c, v) in counts.iter_mut().zip(&run.path.values) {
            if *v > threshold {
                *c += 1;
            }
        }
    }
    let n = replicates as f64;
    Ok(times
        .into_iter()
        .zip(counts)
        .map(|(t, c)| {
            let p = c as f64 / n;
            SurvivalPoint { t, p_hat: p, stderr: (p * (1.0 - p) / n).sqrt() }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalFit {
    pub fitted: f64,
    pub predicted: f64,
    pub relative_error: f64,
    pub pass: bool,
}

/// Regresses `log p̂ - poly·log t` on `t` over the last `tail_fraction` of the
/// curve (points with `p̂ = 0` dropped, weights `p̂ / (1 - p̂)`).
pub fn survival_rate_fit(curve: &[SurvivalPoint], report: &RegimeReport, tail_fraction: f64) -> Result<SurvivalFit> {
    let predicted = report.exponent.ok_or_else(|| invalid("regime", "no decay exponent for this regime"))?;
    let t_end = curve.last().map_or(0.0, |p| p.t);
    let start = t_end * (1.0 - tail_fraction);
    let pts: Vec<&SurvivalPoint> = curve.iter().filter(|p| p.t >= start && p.p_hat > 0.0 && p.t > 0.0).collect();
    ensure(pts.len() >= 3, "curve", "fewer than 3 usable points in the tail window")?;
    let x: Vec<f64> = pts.iter().map(|p| p.t).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.p_hat.ln() - report.poly_order * p.t.ln()).collect();
    let w: Vec<f64> = pts.iter().map(|p| p.p_hat / (1.0 - p.p_hat).max(1e-12)).collect();
    let fit = linear_fit(&x, &y, Some(&w));
    let relative_error = if predicted == 0.0 { fit.slope.abs() } else { ((fit.slope - predicted) / predicted).abs() };
    Ok(SurvivalFit { fitted: fit.slope, predicted, relative_error, pass: relative_error <= 0.1 })
}

/// Ratio max/min of `t p̂(t)²` over the tail window; bounded for `t^{-1/2}` decay.
pub fn critical_drift_factor(curve: &[SurvivalPoint], tail_fraction: f64) -> Result<f64> {
    let t_end = curve.last().map_or(0.0, |p| p.t);
    let vals: Vec<f64> = curve
        .iter()
        .filter(|p| p.t >= t_end * (1.0 - tail_fraction) && p.t > 0.0)
        .map(|p| p.t * p.p_hat * p.p_hat)
        .collect();
    ensure(!vals.is_empty() && vals.iter().all(|&v| v > 0.0), "curve", "tail window has zero survival")?;
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(hi / lo)
}

/// `1 - E exp(-y0 / (γ ∫_0^T e^{-K_s} ds))` over sampled environments: the
/// survival probability given `K`, averaged.
pub fn survival_from_environments(
    r: f64,
    gamma: f64,
    tau: f64,
    fraction: &FractionLaw,
    y0: f64,
    horizon: f64,
    samples: usize,
    seed: u64,
) -> crate::stats::Summary {
    let xs = replicate(seed, samples, |s| {
        let env = sample_env_path(r, tau, fraction, horizon, &mut s.derive(tags::ENVIRONMENT).rng());
        let i = env.integral_exp_neg_k(horizon);
        1.0 - (-y0 / (gamma * i)).exp()
    });
    crate::stats::Summary::of(&xs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    fn half() -> FractionLaw {
        FractionLaw::constant(0.5).unwrap()
    }

    #[test]
    fn fraction_law_checks() {
        assert!(FractionLaw::constant(1.0).is_err());
        assert!(FractionLaw::constant(0.0).is_err());
        assert!(FractionLaw::atoms(vec![(0.5, 0.5)]).is_err());
        let b = FractionLaw::beta(2.0, 3.0).unwrap();
        assert!((b.mean() - 0.4).abs() < 1e-14);
        // digamma(2) - digamma(5)
        assert!((b.mean_log() + (1.0 / 2.0 + 1.0 / 3.0 + 1.0 / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn criterion_examples() {
        let env = CatastropheEnv::constant(1.0, half()).unwrap();
        assert_eq!(extinction_criterion(0.1, &env).unwrap(), ExtinctionVerdict::AlmostSureAbsorption);
        assert_eq!(extinction_criterion(1.0, &env).unwrap(), ExtinctionVerdict::SurvivalPossible);
    }

    #[test]
    fn monotone_criteria() {
        // τ rising from 0.5 to 1.5
        let up = CatastropheRate::state_dependent(Arc::new(|y: f64| 0.5 + y / (1.0 + y)), Monotonicity::NonDecreasing, Some(1.5));
        let env = CatastropheEnv::new(up, half());
        assert_eq!(extinction_criterion(0.3, &env).unwrap(), ExtinctionVerdict::AlmostSureAbsorption);
        assert_eq!(extinction_criterion(1.1, &env).unwrap(), ExtinctionVerdict::SurvivalPossible);
        assert_eq!(extinction_criterion(1.5 * LN_2, &env).unwrap(), ExtinctionVerdict::Undetermined);
        let down = CatastropheRate::state_dependent(Arc::new(|y: f64| 0.5 + 1.0 / (1.0 + y)), Monotonicity::NonIncreasing, Some(1.5));
        let env = CatastropheEnv::new(down, half());
        assert_eq!(extinction_criterion(0.3, &env).unwrap(), ExtinctionVerdict::AlmostSureAbsorption);
        assert_eq!(extinction_criterion(0.4, &env).unwrap(), ExtinctionVerdict::SurvivalPossible);
        let none = CatastropheRate::state_dependent(Arc::new(|_| 1.0), Monotonicity::Undeclared, None);
        assert!(extinction_criterion(0.3, &CatastropheEnv::new(none, half())).is_err());
    }

    #[test]
    fn regimes() {
        let f = half();
        let s = regime_classify(-0.1, 1.0, &f).unwrap();
        assert_eq!(s.regime, Regime::StronglySubcritical);
        assert!((s.exponent.unwrap() + 0.6).abs() < 1e-14);
        assert_eq!(regime_classify(0.5 * LN_2, 1.0, &f).unwrap().regime, Regime::IntermediateSubcritical);
        assert_eq!(regime_classify(LN_2, 1.0, &f).unwrap().regime, Regime::Critical);
        assert_eq!(regime_classify(1.0, 1.0, &f).unwrap().regime, Regime::Supercritical);
        let w = regime_classify(0.5, 1.0, &f).unwrap();
        assert_eq!(w.regime, Regime::WeaklySubcritical);
        // root of 2^{-χ} log(1/2) + 0.5 = 0
        let chi = (2.0 * LN_2).ln() / LN_2;
        assert!((w.chi.unwrap() - chi).abs() < 1e-10);
    }

    #[test]
    fn integral_of_exp_neg_k() {
        let env = EnvPath { r: 0.3, times: vec![0.5, 1.2], fractions: vec![0.5, 0.25], horizon: 2.0 };
        // direct trapezoid on a fine grid
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let s = (i as f64 + 0.5) * h;
            acc += (-env.k_at(s)).exp() * h;
        }
        assert!((env.integral_exp_neg_k(2.0) - acc).abs() < 1e-8);
        assert_eq!(env.integral_exp_neg_k(0.0), 0.0);
    }

    #[test]
    fn halving_is_exact() {
        let env = CatastropheEnv::constant(5.0, half()).unwrap();
        let run = simulate_catastrophe_diffusion(0.0, 0.0, &env, 1.0, 2.0, 0.1, &RngStream::new(3, 0)).unwrap();
        let expect = 0.5f64.powi(run.env.times.len() as i32);
        assert_eq!(run.path.last(), expect);
    }

    #[test]
    fn unbounded_state_rate_rejected() {
        let rate = CatastropheRate::state_dependent(Arc::new(|y: f64| y), Monotonicity::NonDecreasing, None);
        let env = CatastropheEnv::new(rate, half());
        assert!(simulate_catastrophe_diffusion(0.1, 1.0, &env, 1.0, 1.0, 0.1, &RngStream::new(1, 0)).is_err());
    }
}
