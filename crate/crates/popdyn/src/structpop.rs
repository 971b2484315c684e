//! Individual-based model with a one-dimensional trait: exact
//! acceptance-rejection simulation, martingale checks and comparison with the
//! large-population limits (Lotka-Volterra systems, logistic mean field and
//! the accelerated birth-death scalings).
//!
//! Each individual carries a trait in a box `[lo, hi]`. An individual with
//! trait `x` gives birth at rate `b(x)`. With probability `p(x)` the newborn
//! is a mutant whose trait is drawn from the Gaussian kernel conditioned on the
//! box. It dies at rate `d(x) + w(x) * zeta`, where
//! `zeta = (1/K) sum_j C(x - x_j)` is its competition load.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

use crate::error::{ensure, invalid, Error, Result};
use crate::kernel::rng::tags;
use crate::kernel::{replicate, RngStream};
use crate::stats::{histogram, Summary};

pub type TraitFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn constant(c: f64) -> TraitFn {
    Arc::new(move |_| c)
}

/// Law of the mutant trait given the parent's trait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MutationLaw {
    None,
    /// `N(x, sigma^2)` conditioned on the trait box.
    BoxGaussian { sigma: f64 },
}

/// Birth and death rates both raised by `K^eta * gamma(x)`; mutation steps
/// shrink to `sigma / K^(eta/2)`.
#[derive(Clone)]
pub struct Acceleration {
    pub eta: f64,
    pub gamma: TraitFn,
    pub gamma_bar: f64,
}

#[derive(Clone)]
pub struct IbmParams {
    pub lo: f64,
    pub hi: f64,
    pub birth: TraitFn,
    pub birth_bar: f64,
    /// Death rate without competition.
    pub death_base: TraitFn,
    /// Per-unit-load competition weight.
    pub death_weight: TraitFn,
    /// `d(x, zeta) <= death_bar * (1 + zeta)`.
    pub death_bar: f64,
    /// Unscaled interaction kernel, evaluated at `x - y`; divided by `K` internally.
    pub interaction: TraitFn,
    pub interaction_bar: f64,
    pub mutation_prob: TraitFn,
    pub mutation: MutationLaw,
    pub k: f64,
    pub acceleration: Option<Acceleration>,
}

impl std::fmt::Debug for IbmParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IbmParams")
            .field("box", &(self.lo, self.hi))
            .field("birth_bar", &self.birth_bar)
            .field("death_bar", &self.death_bar)
            .field("interaction_bar", &self.interaction_bar)
            .field("mutation", &self.mutation)
            .field("k", &self.k)
            .field("eta", &self.acceleration.as_ref().map(|a| a.eta))
            .finish_non_exhaustive()
    }
}

const GRID: usize = 201;

impl IbmParams {
    /// Sigmoid competition on `[0, 4]` with birth `4 - x`, no intrinsic death
    /// and Gaussian mutation of scale `sigma` with probability `p`.
    pub fn asymmetric_competition(k: f64, p: f64, sigma: f64) -> Result<Self> {
        let params = Self {
            lo: 0.0,
            hi: 4.0,
            birth: Arc::new(|x| 4.0 - x),
            birth_bar: 4.0,
            death_base: constant(0.0),
            death_weight: constant(1.0),
            death_bar: 1.0,
            interaction: Arc::new(asymmetric_interaction),
            interaction_bar: 2.0,
            mutation_prob: constant(p),
            mutation: if p > 0.0 { MutationLaw::BoxGaussian { sigma } } else { MutationLaw::None },
            k,
            acceleration: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// Constant rates `b`, `d + w * c * N / K` on `[0, 1]`, no mutation.
    pub fn logistic(b: f64, d: f64, w: f64, c: f64, k: f64) -> Result<Self> {
        let params = Self {
            lo: 0.0,
            hi: 1.0,
            birth: constant(b),
            birth_bar: b,
            death_base: constant(d),
            death_weight: constant(w),
            death_bar: d.max(w),
            interaction: constant(c),
            interaction_bar: c,
            mutation_prob: constant(0.0),
            mutation: MutationLaw::None,
            k,
            acceleration: None,
        };
        params.validate()?;
        Ok(params)
    }

    #[must_use]
    pub fn with_mutation(mut self, p: f64, law: MutationLaw) -> Self {
        self.mutation_prob = constant(p);
        self.mutation = law;
        self
    }

    #[must_use]
    pub fn with_acceleration(mut self, acc: Acceleration) -> Self {
        self.acceleration = Some(acc);
        self
    }

    /// Checks the declared dominating constants on a grid of the box.
    pub fn validate(&self) -> Result<()> {
        ensure(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo, "box", "need finite lo < hi")?;
        ensure(self.k.is_finite() && self.k > 0.0, "k", "must be positive")?;
        for (name, v) in [
            ("birth_bar", self.birth_bar),
            ("death_bar", self.death_bar),
            ("interaction_bar", self.interaction_bar),
        ] {
            ensure(v.is_finite() && v >= 0.0, name, "must be finite and non-negative")?;
        }
        if let MutationLaw::BoxGaussian { sigma } = self.mutation {
            ensure(sigma.is_finite() && sigma > 0.0, "sigma", "must be positive")?;
        }
        if let Some(acc) = &self.acceleration {
            ensure((0.0..=1.0).contains(&acc.eta), "eta", "must lie in [0, 1]")?;
            ensure(acc.gamma_bar.is_finite() && acc.gamma_bar >= 0.0, "gamma_bar", "must be non-negative")?;
        }
        let width = self.hi - self.lo;
        for i in 0..GRID {
            let x = self.lo + width * i as f64 / (GRID - 1) as f64;
            let u = -width + 2.0 * width * i as f64 / (GRID - 1) as f64;
            let b = (self.birth)(x);
            if !(0.0..=self.birth_bar).contains(&b) {
                return Err(violation("birth_bar", format!("b({x}) = {b}")));
            }
            let (d0, w) = ((self.death_base)(x), (self.death_weight)(x));
            if !(d0 >= 0.0 && w >= 0.0 && d0 <= self.death_bar && w <= self.death_bar) {
                return Err(violation("death_bar", format!("d({x}, .) = {d0} + {w} zeta")));
            }
            let c = (self.interaction)(u);
            if !(0.0..=self.interaction_bar).contains(&c) {
                return Err(violation("interaction_bar", format!("C({u}) = {c}")));
            }
            let p = (self.mutation_prob)(x);
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("mutation_prob", format!("p({x}) = {p} outside [0, 1]")));
            }
            if p > 0.0 && self.mutation == MutationLaw::None {
                return Err(invalid("mutation", "positive mutation probability needs a mutation law"));
            }
            if let Some(acc) = &self.acceleration {
                let g = (acc.gamma)(x);
                if !(0.0..=acc.gamma_bar).contains(&g) {
                    return Err(violation("gamma_bar", format!("gamma({x}) = {g}")));
                }
            }
        }
        Ok(())
    }

    fn speedup(&self) -> f64 {
        self.acceleration.as_ref().map_or(0.0, |a| self.k.powf(a.eta))
    }

    fn effective_sigma(&self) -> Option<f64> {
        match self.mutation {
            MutationLaw::None => None,
            MutationLaw::BoxGaussian { sigma } => {
                let eta = self.acceleration.as_ref().map_or(0.0, |a| a.eta);
                Some(sigma / self.k.powf(eta / 2.0))
            }
        }
    }
}

/// `2 (1 - 1 / (1 + 1.2 exp(-4u)))`.
#[must_use]
pub fn asymmetric_interaction(u: f64) -> f64 {
    2.0 * (1.0 - 1.0 / (1.0 + 1.2 * (-4.0 * u).exp()))
}

fn violation(bound: &'static str, detail: String) -> Error {
    Error::BoundViolation { bound, detail }
}

/// Rates and bounds with the acceleration folded in.
struct Prepared<'a> {
    p: &'a IbmParams,
    speed: f64,
    b_bar: f64,
    d_bar: f64,
    sigma: Option<f64>,
    /// `sup m(x, x + z) / mbar(z)` for the conditioned Gaussian.
    ratio_bar: f64,
    c_hat: f64,
    std: NormalCdf,
}

impl<'a> Prepared<'a> {
    fn new(p: &'a IbmParams, c_hat_factor: f64) -> Result<Self> {
        p.validate()?;
        ensure(c_hat_factor.is_finite() && c_hat_factor >= 1.0, "c_hat_factor", "must be at least 1")?;
        let speed = p.speedup();
        let g_bar = p.acceleration.as_ref().map_or(0.0, |a| a.gamma_bar);
        let b_bar = speed * g_bar + p.birth_bar;
        let d_bar = speed * g_bar + p.death_bar;
        let sigma = p.effective_sigma();
        let std = NormalCdf::new(0.0, 1.0).expect("standard normal");
        // The conditioning mass P(x + sigma Z in box) is smallest at a corner,
        // where it equals Phi(width / sigma) - 1/2.
        let ratio_bar = match sigma {
            None => 0.0,
            Some(s) => 1.0 / (std.cdf((p.hi - p.lo) / s) - 0.5),
        };
        // Per individual, with N alive and zeta <= Cbar N / K:
        //   d + (1-p) b + p b m/mbar <= dbar (1 + Cbar N / K) + bbar max(1, ratio_bar),
        // and this is <= c_hat (N + 1) for every N >= 1 as soon as
        //   c_hat >= dbar Cbar / K  and  c_hat >= dbar + bbar max(1, ratio_bar).
        let c_hat = (d_bar * p.interaction_bar / p.k).max(d_bar + b_bar * ratio_bar.max(1.0)) * c_hat_factor;
        ensure(c_hat > 0.0, "c_hat", "all rates vanish")?;
        Ok(Self { p, speed, b_bar, d_bar, sigma, ratio_bar, c_hat, std })
    }

    fn gamma(&self, x: f64) -> f64 {
        self.p.acceleration.as_ref().map_or(0.0, |a| (a.gamma)(x))
    }

    fn birth(&self, x: f64) -> f64 {
        self.speed * self.gamma(x) + (self.p.birth)(x)
    }

    fn death(&self, x: f64, zeta: f64) -> f64 {
        self.speed * self.gamma(x) + (self.p.death_base)(x) + (self.p.death_weight)(x) * zeta
    }

    fn load(&self, x: f64, traits: &[f64]) -> f64 {
        traits.iter().map(|&y| (self.p.interaction)(x - y)).sum::<f64>() / self.p.k
    }

    /// Conditioning mass of the mutation kernel at `x`.
    fn box_mass(&self, x: f64, s: f64) -> f64 {
        self.std.cdf((self.p.hi - x) / s) - self.std.cdf((self.p.lo - x) / s)
    }

    /// Direct draw from the conditioned kernel, by rejection.
    fn sample_mutant(&self, x: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
        let s = self.sigma.ok_or_else(|| invalid("mutation", "no mutation law"))?;
        let step = Normal::new(0.0, s).map_err(|e| invalid("sigma", e.to_string()))?;
        for _ in 0..MUTATION_TRIES {
            let z = x + step.sample(rng);
            if (self.p.lo..=self.p.hi).contains(&z) {
                return Ok(z);
            }
        }
        Err(Error::Numerical(format!("mutation from {x} left the box {MUTATION_TRIES} times")))
    }
}

const MUTATION_TRIES: usize = 100;

/// Individuals as a list of traits, each of mass `1/K`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPopulation {
    pub traits: Vec<f64>,
    pub k: f64,
}

impl PointPopulation {
    #[must_use]
    pub fn monomorphic(trait_value: f64, n: usize, k: f64) -> Self {
        Self { traits: vec![trait_value; n], k }
    }

    /// `round(mass * K)` individuals at each listed trait.
    #[must_use]
    pub fn from_masses(masses: &[(f64, f64)], k: f64) -> Self {
        let mut traits = Vec::new();
        for &(x, m) in masses {
            traits.extend(std::iter::repeat_n(x, (m * k).round().max(0.0) as usize));
        }
        Self { traits, k }
    }

    #[must_use]
    pub fn size(&self) -> usize {
        self.traits.len()
    }

    #[must_use]
    pub fn mass(&self) -> f64 {
        self.traits.len() as f64 / self.k
    }

    /// Mass carried by individuals whose trait equals `x` exactly.
    #[must_use]
    pub fn mass_at(&self, x: f64) -> f64 {
        self.traits.iter().filter(|&&y| y == x).count() as f64 / self.k
    }

    /// Counts per bin of width `bin_width` starting at `lo`.
    #[must_use]
    pub fn histogram(&self, lo: f64, hi: f64, bin_width: f64) -> Vec<u64> {
        let bins = ((hi - lo) / bin_width).round().max(1.0) as usize;
        histogram(&self.traits, lo, hi, bins)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Death,
    ClonalBirth,
    MutantBirth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbmEvent {
    pub t: f64,
    pub kind: EventKind,
    /// Trait of the individual that died or of the newborn.
    pub trait_value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub proposals: u64,
    pub deaths: u64,
    pub clonal: u64,
    pub mutant: u64,
}

impl EventCounts {
    #[must_use]
    pub fn null(&self) -> u64 {
        self.proposals - self.deaths - self.clonal - self.mutant
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbmSnapshot {
    pub t: f64,
    pub population: PointPopulation,
}

/// Path integrals for a test function `f`, in unscaled counts.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Tracked {
    pub f_start: f64,
    pub f_end: f64,
    /// `int_0^t L<Y_s, f> ds`.
    pub drift: f64,
    /// `int_0^t sum_i [ (b(1-p) + d) f^2 + p b E f(Z)^2 ](x_i) ds`.
    pub qv_compensator: f64,
    /// `sum over events of (jump of <Y, f>)^2`.
    pub jump_squares: f64,
    /// `int_0^t <Y_s, f^2> ds`.
    pub f2_mass: f64,
    /// `int_0^t <Y_s, gamma f^2> ds`; zero without acceleration.
    pub gamma_f2_mass: f64,
}

impl Tracked {
    /// `<Y_t, f> - <Y_0, f> - int L<Y_s, f> ds`.
    #[must_use]
    pub fn martingale(&self) -> f64 {
        self.f_end - self.f_start - self.drift
    }
}

#[derive(Clone)]
pub struct IbmOptions {
    pub snapshot_dt: f64,
    /// Multiplies the derived dominating rate; larger values only add null events.
    pub c_hat_factor: f64,
    pub max_population: usize,
    pub keep_events: bool,
    pub track: Option<TraitFn>,
}

impl Default for IbmOptions {
    fn default() -> Self {
        Self { snapshot_dt: 0.1, c_hat_factor: 1.0, max_population: 200_000, keep_events: false, track: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IbmRun {
    pub c_hat: f64,
    pub snapshots: Vec<IbmSnapshot>,
    pub counts: EventCounts,
    pub events: Vec<IbmEvent>,
    pub extinct_at: Option<f64>,
    /// Time at which `max_population` was exceeded.
    pub truncated_at: Option<f64>,
    pub tracked: Option<Tracked>,
    pub final_population: PointPopulation,
}

impl IbmRun {
    #[must_use]
    pub fn sizes(&self) -> Vec<(f64, usize)> {
        self.snapshots.iter().map(|s| (s.t, s.population.size())).collect()
    }
}

/// Running sums of the generator integrands, kept exact up to rounding by
/// updating every competition load on each real event.
struct Tracker<'a> {
    f: &'a TraitFn,
    loads: Vec<f64>,
    drift_rate: f64,
    qv_rate: f64,
    f2_rate: f64,
    gf2_rate: f64,
    out: Tracked,
    aux: ChaCha8Rng,
}

impl<'a> Tracker<'a> {
    fn new(f: &'a TraitFn, pr: &Prepared<'_>, traits: &[f64], aux: ChaCha8Rng) -> Result<Self> {
        let loads = traits.iter().map(|&x| pr.load(x, traits)).collect();
        let mut t = Self {
            f,
            loads,
            drift_rate: 0.0,
            qv_rate: 0.0,
            f2_rate: 0.0,
            gf2_rate: 0.0,
            out: Tracked { f_start: traits.iter().map(|&x| f(x)).sum(), ..Tracked::default() },
            aux,
        };
        t.refresh(pr, traits)?;
        Ok(t)
    }

    fn refresh(&mut self, pr: &Prepared<'_>, traits: &[f64]) -> Result<()> {
        let (mut drift, mut qv, mut f2, mut gf2) = (0.0, 0.0, 0.0, 0.0);
        for (&x, &zeta) in traits.iter().zip(&self.loads) {
            let fx = (self.f)(x);
            let b = pr.birth(x);
            let d = pr.death(x, zeta);
            let p = (pr.p.mutation_prob)(x);
            // One draw of the mutant trait estimates the kernel average without bias.
            let fz = if p > 0.0 { (self.f)(pr.sample_mutant(x, &mut self.aux)?) } else { 0.0 };
            drift += (1.0 - p) * b * fx + p * b * fz - d * fx;
            qv += ((1.0 - p) * b + d) * fx * fx + p * b * fz * fz;
            f2 += fx * fx;
            gf2 += pr.gamma(x) * fx * fx;
        }
        self.drift_rate = drift;
        self.qv_rate = qv;
        self.f2_rate = f2;
        self.gf2_rate = gf2;
        Ok(())
    }

    fn advance(&mut self, dt: f64) {
        self.out.drift += self.drift_rate * dt;
        self.out.qv_compensator += self.qv_rate * dt;
        self.out.f2_mass += self.f2_rate * dt;
        self.out.gamma_f2_mass += self.gf2_rate * dt;
    }

    fn born(&mut self, pr: &Prepared<'_>, traits: &[f64], z: f64) {
        let k = pr.p.k;
        for (l, &x) in self.loads.iter_mut().zip(traits) {
            *l += (pr.p.interaction)(x - z) / k;
        }
        // `traits` already holds the newborn as its last entry.
        self.loads.push(pr.load(z, traits));
        let fz = (self.f)(z);
        self.out.jump_squares += fz * fz;
    }

    fn died(&mut self, pr: &Prepared<'_>, traits: &[f64], idx: usize, x: f64) {
        // `traits` has already had `idx` swap-removed.
        self.loads.swap_remove(idx);
        let k = pr.p.k;
        for (l, &y) in self.loads.iter_mut().zip(traits) {
            *l -= (pr.p.interaction)(y - x) / k;
        }
        let fx = (self.f)(x);
        self.out.jump_squares += fx * fx;
    }
}

/// Exact simulation by acceptance-rejection against the global rate
/// `c_hat * N * (N + 1)`.
///
/// Each proposal picks an individual uniformly and a uniform `W`. With
/// `D = c_hat (N + 1)` the individual dies if `W < d / D`, gives a clonal birth
/// if `W < (d + (1-p) b) / D`, and a mutant birth at `x + Z`, `Z ~ N(0, sigma^2)`,
/// if `W < (d + (1-p) b + p b m(x, x+Z) / mbar(Z)) / D`; otherwise nothing happens.
pub fn simulate_ibm(
    params: &IbmParams,
    initial: &PointPopulation,
    horizon: f64,
    opts: &IbmOptions,
    stream: &RngStream,
) -> Result<IbmRun> {
    ensure(horizon.is_finite() && horizon >= 0.0, "horizon", "must be finite and non-negative")?;
    ensure(opts.snapshot_dt.is_finite() && opts.snapshot_dt > 0.0, "snapshot_dt", "must be positive")?;
    ensure((initial.k - params.k).abs() <= 1e-12 * params.k, "initial", "scaling K differs from the parameters")?;
    for &x in &initial.traits {
        ensure((params.lo..=params.hi).contains(&x), "initial", "trait outside the box")?;
    }
    let pr = Prepared::new(params, opts.c_hat_factor)?;
    let mut rng = stream.rng();
    let clock = Exp::new(pr.c_hat).map_err(|e| invalid("c_hat", e.to_string()))?;
    let step = pr.sigma.map(|s| Normal::new(0.0, s).expect("positive sigma"));
    let k = params.k;

    let mut traits = initial.traits.clone();
    let mut tracker = match &opts.track {
        Some(f) => Some(Tracker::new(f, &pr, &traits, stream.derive(tags::AUX).rng())?),
        None => None,
    };
    let n_snap = (horizon / opts.snapshot_dt + 1e-9).floor() as usize;
    let mut snapshots = Vec::with_capacity(n_snap + 1);
    let mut counts = EventCounts::default();
    let mut events = Vec::new();
    let mut extinct_at = None;
    let mut truncated_at = None;
    let mut t = 0.0;
    let take_snapshots = |upto: f64, traits: &[f64], snaps: &mut Vec<IbmSnapshot>| {
        while snaps.len() <= n_snap && snaps.len() as f64 * opts.snapshot_dt <= upto {
            let ts = snaps.len() as f64 * opts.snapshot_dt;
            snaps.push(IbmSnapshot { t: ts, population: PointPopulation { traits: traits.to_vec(), k } });
        }
    };

    loop {
        let n = traits.len();
        if n == 0 {
            // The empty population is frozen.
            extinct_at.get_or_insert(t);
            take_snapshots(horizon, &traits, &mut snapshots);
            break;
        }
        if n > opts.max_population {
            truncated_at = Some(t);
            take_snapshots(t, &traits, &mut snapshots);
            break;
        }
        let nf = n as f64;
        let t_next = t + clock.sample(&mut rng) / (nf * (nf + 1.0));
        if t_next > horizon {
            if let Some(tr) = tracker.as_mut() {
                tr.advance(horizon - t);
            }
            take_snapshots(horizon, &traits, &mut snapshots);
            break;
        }
        // The state is constant on [t, t_next).
        take_snapshots(t_next - f64::EPSILON * t_next, &traits, &mut snapshots);
        if let Some(tr) = tracker.as_mut() {
            tr.advance(t_next - t);
        }
        t = t_next;
        counts.proposals += 1;

        let i = rng.random_range(0..n);
        let w: f64 = rng.random();
        let denom = pr.c_hat * (nf + 1.0);
        // Any proposal above this level is null whatever the rates are.
        let gate = (pr.d_bar * (1.0 + params.interaction_bar * nf / k) + pr.b_bar * pr.ratio_bar.max(1.0)) / denom;
        if w >= gate {
            continue;
        }
        let x = traits[i];
        let zeta = pr.load(x, &traits);
        if zeta > params.interaction_bar * nf / k * (1.0 + 1e-12) {
            return Err(violation("interaction_bar", format!("load {zeta} with {n} individuals")));
        }
        let d = pr.death(x, zeta);
        if d > pr.d_bar * (1.0 + zeta) * (1.0 + 1e-12) {
            return Err(violation("death_bar", format!("d({x}, {zeta}) = {d}")));
        }
        let w1 = d / denom;
        if w < w1 {
            traits.swap_remove(i);
            counts.deaths += 1;
            if let Some(tr) = tracker.as_mut() {
                tr.died(&pr, &traits, i, x);
                tr.refresh(&pr, &traits)?;
            }
            if opts.keep_events {
                events.push(IbmEvent { t, kind: EventKind::Death, trait_value: x });
            }
            continue;
        }
        let b = pr.birth(x);
        if b > pr.b_bar * (1.0 + 1e-12) {
            return Err(violation("birth_bar", format!("b({x}) = {b}")));
        }
        let p = (params.mutation_prob)(x);
        let w2 = w1 + (1.0 - p) * b / denom;
        let newborn = if w < w2 {
            counts.clonal += 1;
            Some((x, EventKind::ClonalBirth))
        } else if let (true, Some(step), Some(s)) = (p > 0.0, step.as_ref(), pr.sigma) {
            let z_step = step.sample(&mut rng);
            let z = x + z_step;
            let ratio = if (params.lo..=params.hi).contains(&z) { 1.0 / pr.box_mass(x, s) } else { 0.0 };
            if ratio > pr.ratio_bar * (1.0 + 1e-12) {
                return Err(violation("mutation_ratio_bar", format!("m/mbar = {ratio} at {x}")));
            }
            let w3 = w2 + p * b * ratio / denom;
            if w3 > 1.0 {
                return Err(violation("c_hat", format!("total acceptance {w3} exceeds one")));
            }
            if w < w3 {
                counts.mutant += 1;
                Some((z, EventKind::MutantBirth))
            } else {
                None
            }
        } else {
            None
        };
        if let Some((z, kind)) = newborn {
            traits.push(z);
            if let Some(tr) = tracker.as_mut() {
                tr.born(&pr, &traits, z);
                tr.refresh(&pr, &traits)?;
            }
            if opts.keep_events {
                events.push(IbmEvent { t, kind, trait_value: z });
            }
        }
    }

    let tracked = tracker.map(|tr| {
        let mut out = tr.out;
        out.f_end = traits.iter().map(|&x| (tr.f)(x)).sum();
        out
    });
    Ok(IbmRun {
        c_hat: pr.c_hat,
        snapshots,
        counts,
        events,
        extinct_at,
        truncated_at,
        tracked,
        final_population: PointPopulation { traits, k },
    })
}

/// Monte-Carlo check of the martingale property of `<Y_t, f>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentCheck {
    /// Mean of `<Y_t, f> - <Y_0, f> - int L<Y_s, f> ds`.
    pub residual: f64,
    pub stderr: f64,
    /// Mean squared martingale.
    pub second_moment: f64,
    pub second_moment_stderr: f64,
    /// Mean of the predictable bracket.
    pub compensator: f64,
    pub compensator_stderr: f64,
}

impl MomentCheck {
    #[must_use]
    pub fn residual_ok(&self, k: f64) -> bool {
        self.residual.abs() <= k * self.stderr
    }

    /// `|E M^2 / E<M> - 1|`.
    #[must_use]
    pub fn bracket_rel_error(&self) -> f64 {
        (self.second_moment / self.compensator - 1.0).abs()
    }
}

pub fn generator_moment_check(
    params: &IbmParams,
    f: TraitFn,
    initial: &PointPopulation,
    t: f64,
    reps: usize,
    seed: u64,
) -> Result<MomentCheck> {
    ensure(reps >= 2, "reps", "need at least two replicates")?;
    let opts = IbmOptions { snapshot_dt: t.max(1e-9), track: Some(f), ..IbmOptions::default() };
    let runs = replicate(seed, reps, |s| simulate_ibm(params, initial, t, &opts, &s));
    let mut m = Vec::with_capacity(reps);
    let mut m2 = Vec::with_capacity(reps);
    let mut comp = Vec::with_capacity(reps);
    for r in runs {
        let tr = r?.tracked.expect("tracking requested");
        let mart = tr.martingale();
        m.push(mart);
        m2.push(mart * mart);
        comp.push(tr.qv_compensator);
    }
    let (sm, sm2, sc) = (Summary::of(&m), Summary::of(&m2), Summary::of(&comp));
    Ok(MomentCheck {
        residual: sm.mean,
        stderr: sm.stderr,
        second_moment: sm2.mean,
        second_moment_stderr: sm2.stderr,
        compensator: sc.mean,
        compensator_stderr: sc.stderr,
    })
}

/// Which deterministic limit the simulation is compared with.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitRegime {
    /// One trait, no mutation.
    Monomorphic { trait_value: f64 },
    /// Two traits, no mutation: competitive Lotka-Volterra system.
    Dimorphic { traits: [f64; 2] },
    /// Constant interaction and trait-free rates: logistic total mass.
    MeanField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeRow {
    pub k: f64,
    /// Mean over replicates of the sup over the grid of the largest per-trait gap.
    pub distance: f64,
    pub stderr: f64,
}

/// RK4 for the Lotka-Volterra system `n_i' = n_i (b_i - d_i - w_i sum_j C(x_i - x_j) n_j)`.
pub fn lotka_volterra(params: &IbmParams, traits: &[f64], n0: &[f64], horizon: f64, dt: f64) -> Result<Vec<Vec<f64>>> {
    ensure(traits.len() == n0.len(), "n0", "one initial mass per trait")?;
    ensure(dt > 0.0 && dt.is_finite(), "dt", "must be positive")?;
    let m = traits.len();
    let r: Vec<f64> = traits.iter().map(|&x| (params.birth)(x) - (params.death_base)(x)).collect();
    let w: Vec<f64> = traits.iter().map(|&x| (params.death_weight)(x)).collect();
    let c: Vec<Vec<f64>> =
        traits.iter().map(|&x| traits.iter().map(|&y| (params.interaction)(x - y)).collect()).collect();
    let field = |n: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| n[i] * (r[i] - w[i] * (0..m).map(|j| c[i][j] * n[j]).sum::<f64>()))
            .collect()
    };
    let steps = (horizon / dt).round() as usize;
    let mut n = n0.to_vec();
    let mut out = vec![n.clone()];
    let axpy = |a: &[f64], h: f64, b: &[f64]| a.iter().zip(b).map(|(u, v)| u + h * v).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = field(&n);
        let k2 = field(&axpy(&n, dt / 2.0, &k1));
        let k3 = field(&axpy(&n, dt / 2.0, &k2));
        let k4 = field(&axpy(&n, dt, &k3));
        for i in 0..m {
            n[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out.push(n.clone());
    }
    Ok(out)
}

/// Equilibrium mass `(b - d) / (w C(0))` of the monomorphic logistic limit.
#[must_use]
pub fn monomorphic_equilibrium(params: &IbmParams, x: f64) -> f64 {
    ((params.birth)(x) - (params.death_base)(x)) / ((params.death_weight)(x) * (params.interaction)(0.0))
}

/// Distance between `X^K` and its deterministic limit on the snapshot grid,
/// for each `K` in `k_grid`.
pub fn limit_ode_compare(
    params: &IbmParams,
    regime: &LimitRegime,
    initial_masses: &[(f64, f64)],
    k_grid: &[f64],
    horizon: f64,
    grid_dt: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<OdeRow>> {
    let traits: Vec<f64> = match regime {
        LimitRegime::Monomorphic { trait_value } => vec![*trait_value],
        LimitRegime::Dimorphic { traits } => traits.to_vec(),
        LimitRegime::MeanField => vec![initial_masses.first().map_or(params.lo, |p| p.0)],
    };
    match regime {
        LimitRegime::MeanField => {
            for i in 0..GRID {
                let x = params.lo + (params.hi - params.lo) * i as f64 / (GRID - 1) as f64;
                let u = x - params.lo;
                let same = |g: &TraitFn, a: f64| (g(a) - g(params.lo)).abs() <= 1e-12;
                ensure(
                    same(&params.birth, x) && same(&params.death_base, x) && same(&params.death_weight, x)
                        && same(&params.interaction, u),
                    "regime",
                    "mean field needs trait-free rates and constant interaction",
                )?;
            }
        }
        _ => {
            for &x in &traits {
                ensure((params.mutation_prob)(x) == 0.0, "regime", "needs no mutation")?;
                ensure(initial_masses.iter().any(|p| p.0 == x), "initial_masses", "missing a regime trait")?;
            }
            ensure(initial_masses.len() == traits.len(), "initial_masses", "one entry per regime trait")?;
        }
    }
    let n0: Vec<f64> = match regime {
        LimitRegime::MeanField => vec![initial_masses.iter().map(|p| p.1).sum()],
        _ => traits.iter().map(|x| initial_masses.iter().find(|p| p.0 == *x).map_or(0.0, |p| p.1)).collect(),
    };
    // Fine internal step, sampled on the snapshot grid.
    let sub = 20usize;
    let ode = lotka_volterra(params, &traits, &n0, horizon, grid_dt / sub as f64)?;
    let mut rows = Vec::with_capacity(k_grid.len());
    for (ki, &k) in k_grid.iter().enumerate() {
        let mut pk = params.clone();
        pk.k = k;
        let init = PointPopulation::from_masses(initial_masses, k);
        let opts = IbmOptions { snapshot_dt: grid_dt, ..IbmOptions::default() };
        let runs = replicate(seed.wrapping_add(ki as u64 * 0x9E37), reps, |s| simulate_ibm(&pk, &init, horizon, &opts, &s));
        let mut dists = Vec::with_capacity(reps);
        for r in runs {
            let r = r?;
            let mut sup: f64 = 0.0;
            for (j, snap) in r.snapshots.iter().enumerate() {
                let Some(exact) = ode.get(j * sub) else { break };
                match regime {
                    LimitRegime::MeanField => sup = sup.max((snap.population.mass() - exact[0]).abs()),
                    _ => {
                        for (x, e) in traits.iter().zip(exact) {
                            sup = sup.max((snap.population.mass_at(*x) - e).abs());
                        }
                    }
                }
            }
            dists.push(sup);
        }
        let s = Summary::of(&dists);
        rows.push(OdeRow { k, distance: s.mean, stderr: s.stderr });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumCheck {
    /// Time average of `<X^K, 1>` after burn-in.
    pub mass: f64,
    pub target: f64,
    pub rel_error: f64,
}

/// Monomorphic run started from `K` individuals; compares the time-averaged
/// mass after `burn_in` with the logistic equilibrium.
pub fn equilibrium_tracking(
    params: &IbmParams,
    x: f64,
    horizon: f64,
    burn_in: f64,
    seed: u64,
) -> Result<EquilibriumCheck> {
    ensure(burn_in < horizon, "burn_in", "must be below the horizon")?;
    let mut p = params.clone();
    p.mutation_prob = constant(0.0);
    p.mutation = MutationLaw::None;
    let init = PointPopulation::monomorphic(x, p.k.round() as usize, p.k);
    let opts = IbmOptions { snapshot_dt: 0.05, ..IbmOptions::default() };
    let run = simulate_ibm(&p, &init, horizon, &opts, &RngStream::new(seed, 0))?;
    let tail: Vec<f64> =
        run.snapshots.iter().filter(|s| s.t >= burn_in).map(|s| s.population.mass()).collect();
    let mass = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let target = monomorphic_equilibrium(&p, x);
    Ok(EquilibriumCheck { mass, target, rel_error: (mass / target - 1.0).abs() })
}

/// Fluctuation summary of an accelerated run, in the rescaled `X^K = Y / K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceleratedReport {
    pub k: f64,
    pub eta: f64,
    /// Realized bracket `sum (jump of <X^K, f>)^2`, averaged over replicates.
    pub bracket: f64,
    pub bracket_stderr: f64,
    /// `int <X^K_s, f^2> ds`.
    pub f2_mass: f64,
    /// `2 K^(eta-1) int <X^K_s, gamma f^2> ds`, the leading part of the bracket.
    pub limit_bracket: f64,
    pub final_mass: f64,
}

impl AcceleratedReport {
    /// Bracket per unit of `f^2` mass.
    #[must_use]
    pub fn bracket_per_mass(&self) -> f64 {
        self.bracket / self.f2_mass
    }
}

pub fn accelerated_run(
    params: &IbmParams,
    f: TraitFn,
    initial: &PointPopulation,
    horizon: f64,
    reps: usize,
    seed: u64,
) -> Result<AcceleratedReport> {
    let acc = params
        .acceleration
        .as_ref()
        .ok_or_else(|| invalid("acceleration", "accelerated run needs an acceleration"))?;
    ensure((0.0..=1.0).contains(&acc.eta), "eta", "must lie in [0, 1]")?;
    ensure(reps >= 1, "reps", "need at least one replicate")?;
    let k = params.k;
    let opts = IbmOptions { snapshot_dt: horizon.max(1e-9), track: Some(f), ..IbmOptions::default() };
    let runs = replicate(seed, reps, |s| simulate_ibm(params, initial, horizon, &opts, &s));
    let (mut br, mut f2, mut lim, mut fin) = (Vec::new(), 0.0, 0.0, 0.0);
    for r in runs {
        let r = r?;
        let tr = r.tracked.expect("tracking requested");
        br.push(tr.jump_squares / (k * k));
        f2 += tr.f2_mass / k;
        lim += 2.0 * k.powf(acc.eta - 1.0) * tr.gamma_f2_mass / k;
        fin += r.final_population.mass();
    }
    let s = Summary::of(&br);
    let n = reps as f64;
    Ok(AcceleratedReport {
        k,
        eta: acc.eta,
        bracket: s.mean,
        bracket_stderr: if reps > 1 { s.stderr } else { f64::NAN },
        f2_mass: f2 / n,
        limit_bracket: lim / n,
        final_mass: fin / n,
    })
}

/// `N_T` across replicates with the dominating rate multiplied by `c_hat_factor`.
pub fn final_sizes(
    params: &IbmParams,
    initial: &PointPopulation,
    horizon: f64,
    c_hat_factor: f64,
    reps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let opts = IbmOptions { snapshot_dt: horizon.max(1e-9), c_hat_factor, ..IbmOptions::default() };
    replicate(seed, reps, |s| simulate_ibm(params, initial, horizon, &opts, &s))
        .into_iter()
        .map(|r| r.map(|r| r.final_population.size() as f64))
        .collect()
}

/// Trait-bin counts over time: rows `(t, bin_left_edge, count)` with empty bins skipped.
#[must_use]
pub fn heatmap_rows(run: &IbmRun, lo: f64, hi: f64, bin_width: f64) -> Vec<(f64, f64, u64)> {
    let mut rows = Vec::new();
    for s in &run.snapshots {
        for (j, &c) in s.population.histogram(lo, hi, bin_width).iter().enumerate() {
            if c > 0 {
                rows.push((s.t, lo + j as f64 * bin_width, c));
            }
        }
    }
    rows
}
