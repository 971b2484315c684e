//! Continuous-state branching processes: the branching mechanism `ψ`, the
//! Laplace exponent `u_t(λ)`, long-time classification, and two independent
//! simulators (jump SDE and Lamperti time change of a Lévy process).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{ensure, invalid, Error, Result};
use crate::kernel::stable::poisson;
use crate::kernel::Path;
use crate::numerics::{bisect, dopri, integrate};

/// Lévy measure of the jumps, on `(0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpMeasure {
    None,
    /// Finite atoms `(size h, mass w)`.
    Atoms(Vec<(f64, f64)>),
    /// Density `c h^{-1-α}`, `α ∈ (1, 2)`.
    Stable { c: f64, alpha: f64 },
}

/// Triplet `(r, γ, μ)` with `ψ(λ) = -rλ + γλ² + ∫(e^{-λh} - 1 + λh) μ(dh)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMechanism {
    pub r: f64,
    pub gamma: f64,
    pub jumps: JumpMeasure,
}

/// `e^{-u} - 1 + u` without cancellation for small `u`.
fn phi(u: f64) -> f64 {
    if u < 1e-3 {
        u * u * (0.5 - u * (1.0 / 6.0 - u * (1.0 / 24.0 - u / 120.0)))
    } else {
        (-u).exp_m1() + u
    }
}

/// `Γ(-α)` for `α ∈ (1, 2)`, positive there.
#[must_use]
pub fn gamma_neg(alpha: f64) -> f64 {
    gamma_fn(2.0 - alpha) / (alpha * (alpha - 1.0))
}

impl BranchingMechanism {
    pub fn new(r: f64, gamma: f64, jumps: JumpMeasure) -> Result<Self> {
        ensure(r.is_finite(), "r", "must be finite")?;
        ensure(gamma >= 0.0 && gamma.is_finite(), "gamma", "must be non-negative")?;
        match &jumps {
            JumpMeasure::None => {}
            JumpMeasure::Atoms(a) => {
                ensure(a.iter().all(|(h, w)| *h > 0.0 && h.is_finite() && *w >= 0.0 && w.is_finite()), "jumps", "atoms need h > 0 and w >= 0")?;
            }
            JumpMeasure::Stable { c, alpha } => {
                ensure(*c > 0.0 && c.is_finite(), "jumps.c", "must be positive")?;
                ensure(*alpha > 1.0 && *alpha < 2.0, "jumps.alpha", "must lie in (1, 2)")?;
            }
        }
        let m = Self { r, gamma, jumps };
        ensure(m.moment_integral().is_finite(), "jumps", "∫ h∧h² μ(dh) must be finite")?;
        m.check_convex()?;
        Ok(m)
    }

    pub fn feller(r: f64, gamma: f64) -> Result<Self> {
        Self::new(r, gamma, JumpMeasure::None)
    }

    pub fn stable(r: f64, gamma: f64, c: f64, alpha: f64) -> Result<Self> {
        Self::new(r, gamma, JumpMeasure::Stable { c, alpha })
    }

    fn check_convex(&self) -> Result<()> {
        let h = 0.01;
        let mut prev = (self.psi_exact(0.0), self.psi_exact(h));
        for k in 2..=2000 {
            let x = k as f64 * h;
            let v = self.psi_exact(x);
            let second = v - 2.0 * prev.1 + prev.0;
            if second < -1e-9 * (1.0 + v.abs()) {
                return Err(invalid("mechanism", format!("ψ not convex near λ = {x}")));
            }
            prev = (prev.1, v);
        }
        Ok(())
    }

    /// `∫ (h ∧ h²) μ(dh)`.
    #[must_use]
    pub fn moment_integral(&self) -> f64 {
        match &self.jumps {
            JumpMeasure::None => 0.0,
            JumpMeasure::Atoms(a) => a.iter().map(|(h, w)| w * h.min(h * h)).sum(),
            JumpMeasure::Stable { c, alpha } => c * (1.0 / (2.0 - alpha) + 1.0 / (alpha - 1.0)),
        }
    }

    fn jump_part_exact(&self, lambda: f64) -> f64 {
        match &self.jumps {
            JumpMeasure::None => 0.0,
            JumpMeasure::Atoms(a) => a.iter().map(|(h, w)| w * phi(lambda * h)).sum(),
            JumpMeasure::Stable { c, alpha } => c * gamma_neg(*alpha) * lambda.powf(*alpha),
        }
    }

    /// `ψ` with the stable integral in closed form `c Γ(-α) λ^α`.
    #[must_use]
    pub fn psi_exact(&self, lambda: f64) -> f64 {
        -self.r * lambda + self.gamma * lambda * lambda + self.jump_part_exact(lambda)
    }

    /// `ψ(λ)`: exact for the Brownian and atomic parts, adaptive quadrature
    /// (relative tolerance `rel_tol`) for a stable density.
    pub fn psi(&self, lambda: f64, rel_tol: f64) -> Result<f64> {
        ensure(lambda >= 0.0, "lambda", "must be non-negative")?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let jump = match &self.jumps {
            JumpMeasure::Stable { c, alpha } => stable_integral_quadrature(*c, *alpha, lambda, rel_tol)?,
            _ => self.jump_part_exact(lambda),
        };
        Ok(-self.r * lambda + self.gamma * lambda * lambda + jump)
    }

    /// `ψ'(λ)`.
    #[must_use]
    pub fn psi_prime(&self, lambda: f64) -> f64 {
        let jump = match &self.jumps {
            JumpMeasure::None => 0.0,
            JumpMeasure::Atoms(a) => a.iter().map(|(h, w)| w * h * (-(-lambda * h).exp_m1())).sum(),
            JumpMeasure::Stable { c, alpha } => c * alpha * gamma_neg(*alpha) * lambda.powf(alpha - 1.0),
        };
        -self.r + 2.0 * self.gamma * lambda + jump
    }

    /// Jumps above `ε` as a finite measure, plus what is dropped below it.
    #[must_use]
    pub fn truncated(&self, epsilon: f64) -> TruncatedJumps {
        match &self.jumps {
            JumpMeasure::None => TruncatedJumps { rate: 0.0, mean: 0.0, dropped_variance: 0.0, kind: TruncKind::None },
            JumpMeasure::Atoms(a) => {
                let rate: f64 = a.iter().map(|p| p.1).sum();
                let mean = a.iter().map(|(h, w)| h * w).sum();
                let mut cum = Vec::with_capacity(a.len());
                let mut acc = 0.0;
                for (h, w) in a {
                    acc += w / rate;
                    cum.push((acc, *h));
                }
                TruncatedJumps { rate, mean, dropped_variance: 0.0, kind: TruncKind::Atoms(cum) }
            }
            JumpMeasure::Stable { c, alpha } => TruncatedJumps {
                rate: c * epsilon.powf(-alpha) / alpha,
                mean: c * epsilon.powf(1.0 - alpha) / (alpha - 1.0),
                dropped_variance: c * epsilon.powf(2.0 - alpha) / (2.0 - alpha),
                kind: TruncKind::Pareto { epsilon, alpha: *alpha },
            },
        }
    }
}

/// `c ∫_0^∞ (e^{-λh} - 1 + λh) h^{-1-α} dh` by Kronrod quadrature, split at
/// `h = 1/λ` with power substitutions that make both pieces smooth.
pub fn stable_integral_quadrature(c: f64, alpha: f64, lambda: f64, rel_tol: f64) -> Result<f64> {
    let inv = 1.0 / lambda;
    let pa = 1.0 / (2.0 - alpha);
    let pb = 1.0 / (alpha - 1.0);
    let near = |s: f64| {
        let h = inv * s.powf(pa);
        let dh = inv * pa * s.powf(pa - 1.0);
        phi(lambda * h) * h.powf(-1.0 - alpha) * dh
    };
    let far = |s: f64| {
        let h = inv * s.powf(-pb);
        let dh = inv * pb * s.powf(-pb - 1.0);
        phi(lambda * h) * h.powf(-1.0 - alpha) * dh
    };
    let a = integrate(&near, 0.0, 1.0, rel_tol * 0.1, 0.0)?;
    let b = integrate(&far, 0.0, 1.0, rel_tol * 0.1, 0.0)?;
    Ok(c * (a + b))
}

#[derive(Debug, Clone, PartialEq)]
enum TruncKind {
    None,
    Atoms(Vec<(f64, f64)>),
    Pareto { epsilon: f64, alpha: f64 },
}

/// Finite jump law after truncation at `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedJumps {
    /// Total mass of the kept jumps.
    pub rate: f64,
    /// `∫ h` over the kept jumps (the compensator per unit state).
    pub mean: f64,
    /// `∫ h²` over the dropped jumps.
    pub dropped_variance: f64,
    kind: TruncKind,
}

impl TruncatedJumps {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            TruncKind::None => 0.0,
            TruncKind::Atoms(cum) => {
                let u: f64 = rng.random();
                cum.iter().find(|(p, _)| u < *p).map_or(cum.last().map_or(0.0, |x| x.1), |x| x.1)
            }
            TruncKind::Pareto { epsilon, alpha } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                epsilon * u.powf(-1.0 / alpha)
            }
        }
    }
}

/// Laplace exponent with solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceExponent {
    pub t: f64,
    pub lambda: f64,
    pub value: f64,
    pub steps: usize,
    /// `∫_{u_t}^{λ} dv/ψ(v) - t`, when ψ has no zero between the endpoints.
    pub identity_residual: Option<f64>,
    /// The solution sits at (or converges to) a root of ψ.
    pub fixed_point: bool,
}

/// Closed form of `u_t(λ)` for the Feller mechanism `ψ(λ) = -rλ + γλ²`.
#[must_use]
pub fn feller_laplace_closed_form(r: f64, gamma: f64, t: f64, lambda: f64) -> f64 {
    if r == 0.0 {
        return lambda / (1.0 + gamma * lambda * t);
    }
    let e = (r * t).exp();
    lambda * r * e / (r + gamma * lambda * (e - 1.0))
}

/// `u_t(λ)` from `∂_t u = -ψ(u)`, `u_0 = λ`.
pub fn laplace_exponent(mech: &BranchingMechanism, t: f64, lambda: f64, tol: f64) -> Result<LaplaceExponent> {
    ensure(t >= 0.0, "t", "must be non-negative")?;
    ensure(lambda > 0.0, "lambda", "must be positive")?;
    let mut out = LaplaceExponent { t, lambda, value: lambda, steps: 0, identity_residual: Some(0.0), fixed_point: false };
    if t == 0.0 {
        return Ok(out);
    }
    let eta = largest_root(mech).ok();
    if mech.psi_exact(lambda) == 0.0 {
        out.fixed_point = true;
        out.identity_residual = None;
        return Ok(out);
    }
    let sol = dopri(&|u| -mech.psi_exact(u), lambda, t, tol)?;
    out.value = sol.value;
    out.steps = sol.steps;
    let (lo, hi) = (sol.value.min(lambda), sol.value.max(lambda));
    let near_root = eta.is_some_and(|e| e > 0.0 && (sol.value - e).abs() <= 1e-6 * e);
    let straddles = eta.is_some_and(|e| e > 0.0 && lo <= e && e <= hi);
    if near_root || straddles {
        out.fixed_point = near_root;
        out.identity_residual = None;
    } else {
        let f = |v: f64| 1.0 / mech.psi_exact(v);
        // split geometrically so wide ranges (λ large) are resolved
        let mut acc = 0.0;
        let mut a = lo;
        while a < hi {
            let b = (a * 4.0).min(hi);
            acc += integrate(&f, a, b, 1e-11, 0.0)?;
            a = b;
        }
        let signed = if sol.value <= lambda { acc } else { -acc };
        out.identity_residual = Some(signed - t);
    }
    Ok(out)
}

/// `u_t(∞)` by escalating `λ` until the relative change drops below `tol`;
/// `None` when it does not stabilize (absorption impossible).
pub fn laplace_at_infinity(mech: &BranchingMechanism, t: f64, tol: f64) -> Result<Option<f64>> {
    let mut lam = 1e2;
    let mut prev = laplace_exponent(mech, t, lam, 1e-12)?.value;
    while lam < 1e40 {
        lam *= 100.0;
        let v = laplace_exponent(mech, t, lam, 1e-12)?.value;
        if (v - prev).abs() <= tol * v.abs() {
            return Ok(Some(v));
        }
        prev = v;
    }
    Ok(None)
}

/// Largest root `η` of ψ; 0 when `ψ'(0) = -r >= 0`.
pub fn largest_root(mech: &BranchingMechanism) -> Result<f64> {
    if mech.r <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while mech.psi_exact(hi) <= 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical(format!(
                "no bracket for the largest root of ψ below 1e12 (ψ(1e12) = {:e}); mechanism (r={}, γ={}) has ψ <= 0",
                mech.psi_exact(hi),
                mech.r,
                mech.gamma
            )));
        }
    }
    let mut lo = hi;
    while mech.psi_exact(lo) >= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::Numerical("no negative value of ψ near 0".into()));
        }
    }
    bisect(&|x| mech.psi_exact(x), lo, hi, 1e-15)
}

/// Long-time behaviour of a mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub eta: f64,
    pub absorption_possible: bool,
    pub blowup_possible: bool,
}

impl Classification {
    /// `P_z(Z_t → 0) = e^{-z η}`.
    #[must_use]
    pub fn extinction_prob(&self, z: f64) -> f64 {
        (-z * self.eta).exp()
    }
}

/// Extinction probability via `η`, absorption via the tail of `∫^∞ 1/ψ`, and
/// blow-up (impossible for conservative mechanisms, whose `ψ'(0+) = -r` is finite).
pub fn classify(mech: &BranchingMechanism) -> Result<Classification> {
    let eta = largest_root(mech)?;
    Ok(Classification { eta, absorption_possible: tail_integral_finite(mech, eta), blowup_possible: false })
}

fn tail_integral_finite(mech: &BranchingMechanism, eta: f64) -> bool {
    let a = (2.0 * eta).max(1.0);
    let f = |v: f64| {
        let p = mech.psi_exact(v);
        if p.is_infinite() { 0.0 } else { 1.0 / p }
    };
    let block: f64 = 65536.0;
    let mut incs = Vec::new();
    let mut x = a;
    for _ in 0..40 {
        if mech.psi_exact(x) <= 0.0 {
            return false;
        }
        // substitute v = x e^s to integrate over a factor-`block` range
        let g = |s: f64| {
            let v = x * s.exp();
            v * f(v)
        };
        match integrate(&g, 0.0, block.ln(), 1e-8, 0.0) {
            Ok(v) => incs.push(v),
            Err(_) => return false,
        }
        x *= block;
        if !x.is_finite() {
            break;
        }
    }
    let n = incs.len();
    if n >= 2 && incs[n - 1] <= 1e-12 * incs[0] {
        return true;
    }
    n >= 3 && incs[n - 1] < 0.95 * incs[n - 2] && incs[n - 2] < 0.95 * incs[n - 3]
}

/// Mechanism of the wider non-conservative class, with Lévy density
/// `c h^{-1-α}` for `α ∈ (0, 2)` and truncated compensation `1_{h<=1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WideMechanism {
    pub r: f64,
    pub gamma: f64,
    pub c: f64,
    pub alpha: f64,
}

impl WideMechanism {
    pub fn new(r: f64, gamma: f64, c: f64, alpha: f64) -> Result<Self> {
        ensure(gamma >= 0.0, "gamma", "must be non-negative")?;
        ensure(c >= 0.0, "c", "must be non-negative")?;
        ensure(alpha > 0.0 && alpha < 2.0, "alpha", "must lie in (0, 2)")?;
        Ok(Self { r, gamma, c, alpha })
    }

    /// `ψ'(0+) = -∞`: the large jumps have infinite mean, i.e. `α <= 1`.
    #[must_use]
    pub fn slope_at_zero_infinite(&self) -> bool {
        self.c > 0.0 && self.alpha <= 1.0
    }

    /// `∫_0 ds/ψ(s) > -∞`. Near 0, `ψ(s) ~ -K s^α` for `α < 1` (integrable) and
    /// `ψ(s) ~ -c s log(1/s)` for `α = 1` (not integrable).
    #[must_use]
    pub fn integral_at_zero_finite(&self) -> bool {
        self.c > 0.0 && self.alpha < 1.0
    }

    /// Explosion in finite time with positive probability.
    #[must_use]
    pub fn blowup_possible(&self) -> bool {
        self.slope_at_zero_infinite() && self.integral_at_zero_finite()
    }
}

/// Jump-SDE simulation: Euler for the drift `(r - m_ε) Z` and the square-root
/// diffusion, plus a Poisson(`Z ν_ε h`) number of jumps per step drawn from the
/// truncated measure (`m_ε` is its mean, `ν_ε` its mass). With
/// `gaussian_correction` the variance of the dropped small jumps is added to
/// the diffusion coefficient.
#[allow(clippy::too_many_arguments)]
pub fn simulate_csbp_sde<R: Rng>(
    mech: &BranchingMechanism,
    z0: f64,
    horizon: f64,
    step: f64,
    epsilon: f64,
    gaussian_correction: bool,
    rng: &mut R,
) -> Result<Path> {
    ensure(z0 >= 0.0, "z0", "must be non-negative")?;
    ensure(step > 0.0, "step", "must be positive")?;
    ensure(epsilon > 0.0, "epsilon", "must be positive")?;
    let tj = mech.truncated(epsilon);
    let two_gamma = 2.0 * mech.gamma + if gaussian_correction { tj.dropped_variance } else { 0.0 };
    let mut path = Path::default();
    let mut z = z0;
    path.push(0.0, z);
    if z == 0.0 {
        path.absorbed_at = Some(0.0);
        let n = (horizon / step).ceil() as usize;
        for k in 1..=n {
            path.push((k as f64 * step).min(horizon), 0.0);
        }
        return Ok(path);
    }
    let n = (horizon / step).ceil() as usize;
    let mut t = 0.0;
    for k in 1..=n {
        let tk = (k as f64 * step).min(horizon);
        let h = tk - t;
        t = tk;
        if z > 0.0 {
            let zn: f64 = StandardNormal.sample(rng);
            let mut next = z + (mech.r - tj.mean) * z * h + (two_gamma * z * h).sqrt() * zn;
            let nj = poisson(z * tj.rate * h, rng);
            for _ in 0..nj {
                next += tj.sample(rng);
            }
            if !next.is_finite() {
                path.exploded_at = Some(t);
                path.push(t, next);
                return Ok(path);
            }
            if next <= 0.0 {
                next = 0.0;
                path.absorbed_at = Some(t);
            }
            z = next;
        }
        path.push(t, z);
    }
    Ok(path)
}

/// Lamperti representation: `Z_t = Y_{θ_t}` where `Y` is the Lévy process
/// `y0 + r s + sqrt(2γ) B_s + compensated jumps`, killed at 0, and
/// `t = ∫_0^{θ_t} ds / Y_s`. `Y` is stepped in its own time with steps chosen
/// from the current level (relative change about `rel_step`, real-time advance
/// at most `step`), and real time is accumulated by the trapezoid rule.
#[allow(clippy::too_many_arguments)]
pub fn simulate_csbp_lamperti<R: Rng>(
    mech: &BranchingMechanism,
    z0: f64,
    horizon: f64,
    step: f64,
    epsilon: f64,
    gaussian_correction: bool,
    rng: &mut R,
) -> Result<Path> {
    ensure(z0 >= 0.0, "z0", "must be non-negative")?;
    ensure(step > 0.0, "step", "must be positive")?;
    ensure(epsilon > 0.0, "epsilon", "must be positive")?;
    let tj = mech.truncated(epsilon);
    let two_gamma = 2.0 * mech.gamma + if gaussian_correction { tj.dropped_variance } else { 0.0 };
    let drift = mech.r - tj.mean;
    let rel_step = 0.1;
    let floor = 1e-10 * z0.max(1e-300);
    let n_grid = (horizon / step).ceil() as usize;
    let grid = |k: usize| (k as f64 * step).min(horizon);
    let mut path = Path::default();
    path.push(0.0, z0);
    let mut y = z0;
    let mut t = 0.0;
    let mut next_k = 1usize;
    let mut to_jump = if tj.rate > 0.0 { -rng.random::<f64>().ln() / tj.rate } else { f64::INFINITY };
    while next_k <= n_grid {
        if y <= floor {
            path.absorbed_at = Some(t);
            while next_k <= n_grid {
                path.push(grid(next_k), 0.0);
                next_k += 1;
            }
            break;
        }
        // Lévy-time step keeping the relative change and the real-time advance small.
        let mut ds = step * y;
        if two_gamma > 0.0 {
            ds = ds.min(rel_step * rel_step * y / two_gamma);
        }
        if drift != 0.0 {
            ds = ds.min(rel_step / drift.abs());
        }
        let jump_now = to_jump <= ds;
        if jump_now {
            ds = to_jump;
        }
        to_jump -= ds;
        let zn: f64 = StandardNormal.sample(rng);
        let mut y_new = y + drift * ds + (two_gamma * ds).sqrt() * zn;
        if jump_now {
            y_new += tj.sample(rng);
            to_jump = -rng.random::<f64>().ln() / tj.rate;
        }
        let dt = if y_new > 0.0 {
            0.5 * ds * (1.0 / y + 1.0 / y_new)
        } else {
            // linear interpolation to the zero crossing
            let frac = y / (y - y_new);
            ds * frac / y * 2.0
        };
        let t_new = t + dt;
        while next_k <= n_grid && grid(next_k) <= t_new {
            let w = (grid(next_k) - t) / dt;
            let v = if y_new > 0.0 { y + w * (y_new - y) } else { (y * (1.0 - w)).max(0.0) };
            path.push(grid(next_k), v);
            next_k += 1;
        }
        t = t_new;
        y = y_new.max(0.0);
        if !y.is_finite() {
            path.exploded_at = Some(t);
            break;
        }
    }
    Ok(path)
}

/// Offspring laws for the Galton-Watson scaling demo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OffspringLaw {
    /// Exactly one child.
    Unit,
    /// 0 or 2 children with probability 1/2 each (variance 1).
    Binary,
    /// Poisson(1) children (variance 1).
    Poisson,
    /// Generating function `s + (1-s)^α / α`, critical, in the α-stable domain.
    StableDomain { alpha: f64 },
}

impl OffspringLaw {
    /// Total offspring of `n` individuals.
    pub fn sum_of<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> u64 {
        use rand_distr::Binomial;
        match *self {
            Self::Unit => n,
            Self::Binary => 2 * Binomial::new(n, 0.5).map(|b| b.sample(rng)).unwrap_or(0),
            Self::Poisson => poisson(n as f64, rng),
            Self::StableDomain { alpha } => (0..n).map(|_| stable_domain_draw(alpha, rng)).sum(),
        }
    }

    /// Generating function `f(s) = E s^A`.
    #[must_use]
    pub fn pgf(&self, s: f64) -> f64 {
        match *self {
            Self::Unit => s,
            Self::Binary => 0.5 + 0.5 * s * s,
            Self::Poisson => (s - 1.0).exp(),
            Self::StableDomain { alpha } => s + (1.0 - s).powf(alpha) / alpha,
        }
    }

    /// Limiting mechanism and generations-per-unit-time rule `v_K`.
    pub fn limit(&self) -> Result<(BranchingMechanism, Box<dyn Fn(u64) -> f64 + Send + Sync>)> {
        Ok(match *self {
            Self::Unit => (BranchingMechanism::feller(0.0, 0.0)?, Box::new(|k| k as f64)),
            Self::Binary | Self::Poisson => (BranchingMechanism::feller(0.0, 0.5)?, Box::new(|k| k as f64)),
            Self::StableDomain { alpha } => {
                // ψ(λ) = λ^α / α = c Γ(-α) λ^α
                let c = 1.0 / (alpha * gamma_neg(alpha));
                (BranchingMechanism::stable(0.0, 0.0, c, alpha)?, Box::new(move |k| (k as f64).powf(alpha - 1.0)))
            }
        })
    }
}

/// `p_0 = 1/α`, `p_1 = 0`, `p_{k+1} = p_k (k - α)/(k + 1)` for `k >= 2`.
fn stable_domain_draw<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut cdf = 1.0 / alpha;
    if u < cdf {
        return 0;
    }
    let mut p = 0.5 * alpha * (alpha - 1.0) / alpha;
    let mut k = 2u64;
    loop {
        cdf += p;
        if u < cdf || k > 100_000_000 {
            return k;
        }
        p *= (k as f64 - alpha) / (k as f64 + 1.0);
        k += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwScalingRow {
    pub k: u64,
    pub generations: u64,
    /// `max_λ |MC E e^{-λ Z^K_t} - e^{-z u_t(λ)}|`
    pub distance: f64,
    pub stderr: f64,
    /// Same distance for the exact finite-K transform (iterated generating function).
    pub exact_distance: f64,
}

/// Rescaled Galton-Watson processes `Z^K_t = X_{[v_K t]} / K`, `X_0 = K z`,
/// compared with the limiting CSBP through Laplace transforms on `lambdas`.
pub fn gw_scaling_demo(
    law: OffspringLaw,
    k_grid: &[u64],
    z: f64,
    t: f64,
    lambdas: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<Vec<GwScalingRow>> {
    ensure(replicates >= 2, "replicates", "need at least 2")?;
    if let OffspringLaw::StableDomain { alpha } = law {
        ensure(alpha > 1.0 && alpha < 2.0, "alpha", "must lie in (1, 2)")?;
    }
    let (mech, v) = law.limit()?;
    let limit: Vec<f64> = lambdas
        .iter()
        .map(|&l| laplace_exponent(&mech, t, l, 1e-12).map(|u| (-z * u.value).exp()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (idx, &k) in k_grid.iter().enumerate() {
        let gens = (v(k) * t).floor() as u64;
        let x0 = (k as f64 * z).round() as u64;
        let finals: Vec<f64> = crate::kernel::replicate(seed.wrapping_add(idx as u64 * 7919), replicates, |s| {
            let mut rng = s.rng();
            let mut x = x0;
            for _ in 0..gens {
                if x == 0 {
                    break;
                }
                x = law.sum_of(x, &mut rng);
            }
            x as f64 / k as f64
        });
        let mut dist = 0.0f64;
        let mut se_at = 0.0;
        let mut exact_dist = 0.0f64;
        for (j, &l) in lambdas.iter().enumerate() {
            let e: Vec<f64> = finals.iter().map(|x| (-l * x).exp()).collect();
            let s = crate::stats::Summary::of(&e);
            let d = (s.mean - limit[j]).abs();
            if d > dist {
                dist = d;
                se_at = s.stderr;
            }
            let mut f = (-l / k as f64).exp();
            for _ in 0..gens {
                f = law.pgf(f);
            }
            exact_dist = exact_dist.max((f.powf(x0 as f64) - limit[j]).abs());
        }
        rows.push(GwScalingRow { k, generations: gens, distance: dist, stderr: se_at, exact_distance: exact_dist });
    }
    Ok(rows)
}
