//! Cell division with parasite infection: each cell carries a Feller load,
//! divides at rate `τ(load)`, and shares its load between the two daughters as
//! `(θx, (1-θ)x)` with `θ ~ F`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::catastrophe::{simulate_catastrophe_diffusion, CatastropheEnv, FractionLaw, RateFn};
use crate::error::{ensure, invalid, Result};
use crate::kernel::feller::feller_step;
use crate::kernel::rng::tags;
use crate::kernel::{replicate, RngStream};
use crate::stats::Summary;

#[derive(Clone)]
pub enum DivisionRate {
    Constant(f64),
    /// `τ(x) <= bar (1 + x^power)`.
    Bounded { tau: RateFn, bar: f64, power: f64 },
    /// No division below `level`; a cell whose load is at least `level` at an
    /// output time divides there.
    AtLoad { level: f64 },
}

impl std::fmt::Debug for DivisionRate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(t) => write!(f, "Constant({t})"),
            Self::Bounded { bar, power, .. } => write!(f, "Bounded {{ bar: {bar}, power: {power} }}"),
            Self::AtLoad { level } => write!(f, "AtLoad {{ level: {level} }}"),
        }
    }
}

impl DivisionRate {
    fn at(&self, x: f64) -> f64 {
        match self {
            Self::Constant(t) => *t,
            Self::Bounded { tau, .. } => tau(x),
            Self::AtLoad { level } => {
                if x >= *level {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// `inf_x τ(x)` over a log grid.
    #[must_use]
    pub fn infimum(&self) -> f64 {
        std::iter::once(0.0)
            .chain((-120..=120).map(|k| 10f64.powf(f64::from(k) / 10.0)))
            .map(|x| self.at(x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct SplitParams {
    pub r: f64,
    pub gamma: f64,
    pub rate: DivisionRate,
    /// Symmetric sharing law: `F` and `1 - F` have the same law.
    pub fraction: FractionLaw,
}

impl SplitParams {
    /// Atom laws are symmetrized; Beta laws must already have `a = b`.
    pub fn new(r: f64, gamma: f64, rate: DivisionRate, fraction: FractionLaw) -> Result<Self> {
        ensure(r.is_finite(), "r", "must be finite")?;
        ensure(gamma >= 0.0 && gamma.is_finite(), "gamma", "must be non-negative")?;
        match &rate {
            DivisionRate::Constant(t) => ensure(*t >= 0.0 && t.is_finite(), "tau", "must be non-negative")?,
            DivisionRate::Bounded { bar, power, .. } => {
                ensure(*bar >= 0.0 && bar.is_finite(), "tau.bar", "must be non-negative")?;
                ensure(*power >= 0.0 && power.is_finite(), "tau.power", "must be non-negative")?;
            }
            DivisionRate::AtLoad { level } => ensure(*level > 0.0, "tau.level", "must be positive")?,
        }
        let fraction = match fraction {
            FractionLaw::Atoms(atoms) => {
                ensure(atoms.iter().all(|&(t, _)| t < 1.0), "fraction", "sharing fractions must lie in (0, 1)")?;
                let mut sym: Vec<(f64, f64)> = Vec::new();
                for (t, p) in atoms {
                    for v in [t, 1.0 - t] {
                        match sym.iter_mut().find(|a| a.0 == v) {
                            Some(a) => a.1 += p / 2.0,
                            None => sym.push((v, p / 2.0)),
                        }
                    }
                }
                FractionLaw::atoms(sym)?
            }
            FractionLaw::Beta { a, b } => {
                ensure(a == b, "fraction", "a Beta sharing law must have a = b")?;
                FractionLaw::Beta { a, b }
            }
        };
        Ok(Self { r, gamma, rate, fraction })
    }

    /// The constant division rate, if any.
    #[must_use]
    pub fn constant_rate(&self) -> Option<f64> {
        match self.rate {
            DivisionRate::Constant(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellNode {
    /// Word in {1,2}*; the root is the empty word.
    pub label: String,
    pub parent: Option<usize>,
    pub birth: f64,
    pub split: Option<f64>,
    pub load_at_birth: f64,
    pub load_at_split: Option<f64>,
}

/// Loads of the cells alive at an output time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub loads: Vec<f64>,
}

impl Snapshot {
    #[must_use]
    pub fn cells(&self) -> usize {
        self.loads.len()
    }

    #[must_use]
    pub fn infected(&self) -> usize {
        self.loads.iter().filter(|&&x| x > 0.0).count()
    }

    #[must_use]
    pub fn total_load(&self) -> f64 {
        self.loads.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellTree {
    pub nodes: Vec<CellNode>,
    pub snapshots: Vec<Snapshot>,
    /// Set when the alive count passed `max_cells`; snapshots stop there.
    pub truncated_at: Option<f64>,
    /// Set when the run stopped early on a stopping rule.
    pub stopped_at: Option<f64>,
    /// Thinning candidates where `τ` exceeded the per-step bound.
    pub bound_violations: u64,
}

impl CellTree {
    #[must_use]
    pub fn alive_at(&self, t: f64) -> Option<&Snapshot> {
        self.snapshots.iter().rev().find(|s| s.t <= t + 1e-12)
    }

    #[must_use]
    pub fn last(&self) -> &Snapshot {
        &self.snapshots[self.snapshots.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitOptions {
    pub step: f64,
    pub max_cells: usize,
    /// Stop once the total load is 0.
    pub stop_on_clearance: bool,
    /// Stop once the total load exceeds this level.
    pub stop_above_load: Option<f64>,
    /// Skip node bookkeeping (snapshots are still kept).
    pub keep_nodes: bool,
    /// Record a snapshot every this many steps (the final time is always recorded).
    pub snapshot_every: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { step: 0.1, max_cells: 100_000, stop_on_clearance: false, stop_above_load: None, keep_nodes: true, snapshot_every: 1 }
    }
}

struct Alive {
    node: usize,
    stream: RngStream,
    rng: ChaCha8Rng,
    load: f64,
    running_max: f64,
}

fn child_stream(parent: &RngStream, digit: u64) -> RngStream {
    parent.derive(tags::TREE.wrapping_mul(31).wrapping_add(digit))
}

/// Simulate one cell tree. Each cell owns a random stream derived from its
/// label, so results do not depend on processing order.
pub fn simulate_splitting(params: &SplitParams, x0: f64, horizon: f64, opts: &SplitOptions, stream: &RngStream) -> Result<CellTree> {
    ensure(x0 >= 0.0 && x0.is_finite(), "x0", "must be non-negative")?;
    ensure(opts.step > 0.0, "step", "must be positive")?;
    ensure(opts.max_cells >= 1, "max_cells", "must be at least 1")?;
    let root_stream = stream.derive(tags::TREE);
    let mut tree = CellTree { nodes: Vec::new(), snapshots: Vec::new(), truncated_at: None, stopped_at: None, bound_violations: 0 };
    let push_node = |tree: &mut CellTree, label: String, parent: Option<usize>, birth: f64, load: f64| {
        if opts.keep_nodes {
            tree.nodes.push(CellNode { label, parent, birth, split: None, load_at_birth: load, load_at_split: None });
            tree.nodes.len() - 1
        } else {
            usize::MAX
        }
    };
    let root = push_node(&mut tree, String::new(), None, 0.0, x0);
    let mut alive = vec![Alive { node: root, stream: root_stream, rng: root_stream.rng(), load: x0, running_max: x0 }];
    tree.snapshots.push(Snapshot { t: 0.0, loads: vec![x0] });
    let n = (horizon / opts.step).ceil() as usize;
    let mut t = 0.0;
    for k in 1..=n {
        let b = (k as f64 * opts.step).min(horizon);
        let mut queue: Vec<(Alive, f64)> = alive.drain(..).map(|c| (c, t)).collect();
        let mut next: Vec<Alive> = Vec::with_capacity(queue.len());
        while let Some((mut cell, mut s)) = queue.pop() {
            let divided_at = match &params.rate {
                DivisionRate::AtLoad { level } => {
                    cell.load = feller_step(cell.load, params.r, params.gamma, b - s, &mut cell.rng);
                    (cell.load >= *level).then_some(b)
                }
                rate => {
                    let mut hit = None;
                    loop {
                        let bound = match rate {
                            DivisionRate::Constant(tau) => *tau,
                            DivisionRate::Bounded { bar, power, .. } => bar * (1.0 + cell.running_max.powf(*power)),
                            DivisionRate::AtLoad { .. } => unreachable!(),
                        };
                        let gap = if bound > 0.0 { -(1.0 - cell.rng.random::<f64>()).ln() / bound } else { f64::INFINITY };
                        if s + gap >= b {
                            cell.load = feller_step(cell.load, params.r, params.gamma, b - s, &mut cell.rng);
                            cell.running_max = cell.running_max.max(cell.load);
                            break;
                        }
                        cell.load = feller_step(cell.load, params.r, params.gamma, gap, &mut cell.rng);
                        cell.running_max = cell.running_max.max(cell.load);
                        s += gap;
                        let accept = match rate {
                            DivisionRate::Constant(_) => true,
                            _ => {
                                let tau = rate.at(cell.load);
                                if tau > bound {
                                    tree.bound_violations += 1;
                                }
                                cell.rng.random::<f64>() * bound < tau
                            }
                        };
                        if accept {
                            hit = Some(s);
                            break;
                        }
                    }
                    hit
                }
            };
            let Some(ds) = divided_at else {
                next.push(cell);
                continue;
            };
            // Shares from one draw: the larger share is at least x/2, so x - big is exact.
            let x = cell.load;
            let theta = params.fraction.sample(&mut cell.rng);
            let big = theta.max(1.0 - theta) * x;
            let small = x - big;
            let (first, second) = if theta >= 0.5 { (big, small) } else { (small, big) };
            let parent_label = if opts.keep_nodes {
                let node = &mut tree.nodes[cell.node];
                node.split = Some(ds);
                node.load_at_split = Some(x);
                node.label.clone()
            } else {
                String::new()
            };
            for (digit, load) in [(1u64, first), (2u64, second)] {
                let cs = child_stream(&cell.stream, digit);
                let node = push_node(&mut tree, format!("{parent_label}{digit}"), Some(cell.node), ds, load);
                let child = Alive { node, stream: cs, rng: cs.rng(), load, running_max: load };
                if ds < b {
                    queue.push((child, ds));
                } else {
                    next.push(child);
                }
            }
        }
        // order by label-derived stream so snapshots are independent of queue order
        next.sort_by_key(|c| (c.stream.seed, c.stream.stream_id));
        alive = next;
        t = b;
        let total: f64 = alive.iter().map(|c| c.load).sum();
        let truncated = alive.len() > opts.max_cells;
        let stopped = (opts.stop_on_clearance && total == 0.0) || opts.stop_above_load.is_some_and(|m| total > m);
        if k % opts.snapshot_every.max(1) == 0 || k == n || truncated || stopped {
            tree.snapshots.push(Snapshot { t, loads: alive.iter().map(|c| c.load).collect() });
        }
        if truncated {
            tree.truncated_at = Some(t);
            break;
        }
        if stopped {
            tree.stopped_at = Some(t);
            break;
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionCheck {
    pub frequency: f64,
    pub stderr: f64,
    /// `exp(-r x0 / γ)` (1 when `r <= 0`).
    pub target: f64,
    /// Runs still open at the horizon or at truncation.
    pub undecided: usize,
}

/// Probability of total-parasite clearance. Runs stop on clearance or once
/// the total load passes `escape_load`; a run that stops with load `X > 0`
/// (escape, truncation or horizon) contributes `exp(-r X / γ)`, the clearance
/// probability of the total load from there, since the total load is itself a
/// Feller diffusion.
pub fn total_mass_extinction(
    params: &SplitParams,
    x0: f64,
    horizon: f64,
    escape_load: f64,
    replicates: usize,
    seed: u64,
) -> Result<ExtinctionCheck> {
    let opts = SplitOptions {
        step: 0.5,
        stop_on_clearance: true,
        stop_above_load: Some(escape_load),
        keep_nodes: false,
        snapshot_every: usize::MAX,
        ..SplitOptions::default()
    };
    let clear_from = |x: f64| if params.r <= 0.0 { 1.0 } else { (-params.r * x / params.gamma).exp() };
    let outcomes = replicate(seed, replicates, |s| {
        simulate_splitting(params, x0, horizon, &opts, &s).map(|tree| {
            let x = tree.last().total_load();
            let open = x > 0.0 && tree.stopped_at.is_none();
            (if x == 0.0 { 1.0 } else { clear_from(x) }, open)
        })
    });
    let mut vals = Vec::with_capacity(replicates);
    let mut undecided = 0;
    for o in outcomes {
        let (v, open) = o?;
        vals.push(v);
        undecided += usize::from(open);
    }
    let s = Summary::of(&vals);
    let target = if x0 == 0.0 { 1.0 } else { clear_from(x0) };
    Ok(ExtinctionCheck { frequency: s.mean, stderr: s.stderr, target, undecided })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub lhs: Summary,
    pub rhs: Summary,
    /// `(lhs - rhs) / combined stderr`.
    pub z: f64,
    pub agree: bool,
}

/// `e^{-τt} E Σ_{i∈V_t} f(X^i_t)` from the tree against `E f(Y_t)` where `Y`
/// is the Feller diffusion with catastrophes at rate `aux_factor · τ` and
/// fractions `F`. The identity holds for `aux_factor = 2`.
#[allow(clippy::too_many_arguments)]
pub fn auxiliary_identity_check(
    params: &SplitParams,
    f: &(dyn Fn(f64) -> f64 + Sync),
    x0: f64,
    t: f64,
    aux_factor: f64,
    replicates: usize,
    seed: u64,
) -> Result<IdentityCheck> {
    let tau = params.constant_rate().ok_or_else(|| invalid("tau", "identity needs a constant division rate"))?;
    let opts = SplitOptions { step: t, keep_nodes: false, ..SplitOptions::default() };
    let lhs: Vec<f64> = replicate(seed, replicates, |s| {
        simulate_splitting(params, x0, t, &opts, &s).map(|tree| (-tau * t).exp() * tree.last().loads.iter().map(|&x| f(x)).sum::<f64>())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let env = CatastropheEnv::constant(aux_factor * tau, params.fraction.clone())?;
    let rhs: Vec<f64> = replicate(seed ^ 0xA5A5_5A5A, replicates, |s| {
        simulate_catastrophe_diffusion(params.r, params.gamma, &env, x0.max(f64::MIN_POSITIVE), t, t, &s).map(|run| f(run.path.last()))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (lhs, rhs) = (Summary::of(&lhs), Summary::of(&rhs));
    let se = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
    let z = if se > 0.0 { (lhs.mean - rhs.mean) / se } else if lhs.mean == rhs.mean { 0.0 } else { f64::INFINITY };
    Ok(IdentityCheck { lhs, rhs, z, agree: z.abs() <= 3.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recovery {
    RecoversAlmostSurely,
    ProliferationPossible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryReport {
    pub verdict: Recovery,
    /// Growth exponents `κ` below this bound are reached with positive probability.
    pub kappa_bound: Option<f64>,
    /// `1 - exp(-r x0 / γ)`.
    pub survival_prob: Option<f64>,
}

/// Recovery criterion `r <= 2τ E log(1/F)` for a constant division rate.
pub fn recovery_classify(params: &SplitParams, x0: f64) -> Result<RecoveryReport> {
    let tau = params.constant_rate().ok_or_else(|| invalid("tau", "needs a constant division rate"))?;
    let threshold = -2.0 * tau * params.fraction.mean_log();
    Ok(if params.r <= threshold {
        RecoveryReport { verdict: Recovery::RecoversAlmostSurely, kappa_bound: None, survival_prob: None }
    } else {
        RecoveryReport {
            verdict: Recovery::ProliferationPossible,
            kappa_bound: Some(params.r - threshold),
            survival_prob: Some(1.0 - (-params.r * x0 / params.gamma).exp()),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneRecovery {
    RecoversAlmostSurely,
    Inconclusive,
}

/// Sufficient condition `r <= τ_* E log(1 / min(F, 1-F))`.
pub fn monotone_rate_recovery(params: &SplitParams) -> Result<MonotoneRecovery> {
    let tau_star = params.rate.infimum();
    let m = match &params.fraction {
        FractionLaw::Atoms(a) => a.iter().map(|&(t, p)| -p * t.min(1.0 - t).ln()).sum::<f64>(),
        FractionLaw::Beta { a, b } => {
            // E log(1/min(F, 1-F)) = 2 ∫_0^{1/2} -log x · beta density
            let dist = statrs::distribution::Beta::new(*a, *b).map_err(|e| invalid("fraction", e.to_string()))?;
            use statrs::distribution::Continuous;
            let f = |x: f64| -x.ln() * dist.pdf(x);
            2.0 * crate::numerics::integrate(&f, 0.0, 0.5, 1e-10, 1e-14)?
        }
    };
    Ok(if params.r <= tau_star * m { MonotoneRecovery::RecoversAlmostSurely } else { MonotoneRecovery::Inconclusive })
}

/// `F = 1/2` with division as soon as the load reaches 2.
pub fn moderate_infection_params(r: f64, gamma: f64) -> Result<SplitParams> {
    SplitParams::new(r, gamma, DivisionRate::AtLoad { level: 2.0 }, FractionLaw::constant(0.5)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(r: f64, tau: f64) -> SplitParams {
        SplitParams::new(r, 1.0, DivisionRate::Constant(tau), FractionLaw::constant(0.5).unwrap()).unwrap()
    }

    #[test]
    fn symmetrizes_atoms() {
        let p = SplitParams::new(1.0, 1.0, DivisionRate::Constant(1.0), FractionLaw::constant(0.3).unwrap()).unwrap();
        assert_eq!(p.fraction, FractionLaw::Atoms(vec![(0.3, 0.5), (0.7, 0.5)]));
        assert!(SplitParams::new(1.0, 1.0, DivisionRate::Constant(1.0), FractionLaw::beta(1.0, 2.0).unwrap()).is_err());
    }

    #[test]
    fn mass_is_conserved_at_division() {
        let p = SplitParams::new(1.0, 1.0, DivisionRate::Constant(2.0), FractionLaw::beta(2.0, 2.0).unwrap()).unwrap();
        let tree = simulate_splitting(&p, 3.7, 3.0, &SplitOptions::default(), &RngStream::new(1, 2)).unwrap();
        let mut checked = 0;
        for (i, node) in tree.nodes.iter().enumerate() {
            if let Some(x) = node.load_at_split {
                let kids: Vec<&CellNode> = tree.nodes.iter().filter(|c| c.parent == Some(i)).collect();
                assert_eq!(kids.len(), 2);
                assert_eq!(kids[0].load_at_birth + kids[1].load_at_birth, x);
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn labels_are_prefix_closed() {
        let tree = simulate_splitting(&base(1.0, 1.5), 1.0, 3.0, &SplitOptions::default(), &RngStream::new(2, 0)).unwrap();
        let labels: std::collections::HashSet<&str> = tree.nodes.iter().map(|n| n.label.as_str()).collect();
        for l in &labels {
            assert!(l.chars().all(|c| c == '1' || c == '2'));
            if !l.is_empty() {
                assert!(labels.contains(&l[..l.len() - 1]));
            }
        }
    }

    #[test]
    fn uninfected_stays_uninfected() {
        let tree = simulate_splitting(&base(1.0, 1.0), 0.0, 4.0, &SplitOptions::default(), &RngStream::new(3, 0)).unwrap();
        assert!(tree.snapshots.iter().all(|s| s.infected() == 0));
        assert!(tree.last().cells() > 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = base(1.0, 1.0);
        let a = simulate_splitting(&p, 1.0, 3.0, &SplitOptions::default(), &RngStream::new(4, 7)).unwrap();
        let b = simulate_splitting(&p, 1.0, 3.0, &SplitOptions::default(), &RngStream::new(4, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn truncation_is_flagged() {
        let opts = SplitOptions { max_cells: 50, ..SplitOptions::default() };
        let tree = simulate_splitting(&base(1.0, 3.0), 1.0, 10.0, &opts, &RngStream::new(5, 0)).unwrap();
        assert!(tree.truncated_at.is_some());
    }

    #[test]
    fn recovery_examples() {
        assert_eq!(recovery_classify(&base(1.0, 1.0), 1.0).unwrap().verdict, Recovery::RecoversAlmostSurely);
        let p = recovery_classify(&base(2.0, 1.0), 1.0).unwrap();
        assert_eq!(p.verdict, Recovery::ProliferationPossible);
        assert!((p.kappa_bound.unwrap() - (2.0 - 2.0 * std::f64::consts::LN_2)).abs() < 1e-14);
        assert!((p.survival_prob.unwrap() - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn monotone_examples() {
        assert_eq!(monotone_rate_recovery(&base(0.5, 1.0)).unwrap(), MonotoneRecovery::RecoversAlmostSurely);
        assert_eq!(monotone_rate_recovery(&base(0.8, 1.0)).unwrap(), MonotoneRecovery::Inconclusive);
        let zero = SplitParams::new(0.1, 1.0, DivisionRate::Bounded { tau: std::sync::Arc::new(|x: f64| x / (1.0 + x)), bar: 1.0, power: 0.0 }, FractionLaw::constant(0.5).unwrap()).unwrap();
        assert_eq!(monotone_rate_recovery(&zero).unwrap(), MonotoneRecovery::Inconclusive);
        let zero_r = SplitParams { r: 0.0, ..zero };
        assert_eq!(monotone_rate_recovery(&zero_r).unwrap(), MonotoneRecovery::RecoversAlmostSurely);
    }

    #[test]
    fn moderate_loads_stay_bounded_after_division() {
        let p = moderate_infection_params(1.0, 1.0).unwrap();
        let opts = SplitOptions { step: 0.001, max_cells: 2000, ..SplitOptions::default() };
        let tree = simulate_splitting(&p, 1.0, 3.0, &opts, &RngStream::new(6, 0)).unwrap();
        for s in &tree.snapshots {
            assert!(s.loads.iter().all(|&x| x < 2.0));
        }
    }
}
