//! Branching Markov processes along continuous-time Galton-Watson trees:
//! exponential lifetimes, offspring counts from `p`, a trait that moves as a
//! Markov process along each branch and is redistributed at branching.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::catastrophe::FractionLaw;
use crate::error::{ensure, Result};
use crate::kernel::feller::feller_step;
use crate::kernel::rng::tags;
use crate::kernel::{replicate, RngStream};
use crate::stats::Summary;

/// Offspring law `(p_0, p_1, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringDist {
    probs: Vec<f64>,
}

impl OffspringDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        ensure(!probs.is_empty(), "offspring", "needs at least one probability")?;
        ensure(probs.iter().all(|&p| (0.0..=1.0).contains(&p)), "offspring", "probabilities must lie in [0, 1]")?;
        let total: f64 = probs.iter().sum();
        ensure((total - 1.0).abs() < 1e-9, "offspring", "probabilities must sum to 1")?;
        Ok(Self { probs })
    }

    /// Point mass at `k`.
    pub fn fixed(k: usize) -> Result<Self> {
        let mut p = vec![0.0; k + 1];
        p[k] = 1.0;
        Self::new(p)
    }

    #[must_use]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[must_use]
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    #[must_use]
    pub fn second_moment(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| (k * k) as f64 * p).sum()
    }

    #[must_use]
    pub fn is_supercritical(&self) -> bool {
        self.mean() > 1.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        draw(&self.probs, 1.0, rng)
    }

    /// `k` with probability `k p_k / m`.
    pub fn sample_size_biased<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let w: Vec<f64> = self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).collect();
        draw(&w, self.mean(), rng)
    }
}

fn draw<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Trait motion between branchings, each with an exact transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraitMotion {
    Constant,
    /// `dX = a X dt + σ dB` (Brownian motion when `a = 0`).
    LinearGaussian { a: f64, sigma: f64 },
    /// `dX = r X dt + sqrt(2 γ X) dB` on `[0, ∞)`.
    Feller { r: f64, gamma: f64 },
}

impl TraitMotion {
    pub fn advance<R: Rng + ?Sized>(&self, x: f64, h: f64, rng: &mut R) -> f64 {
        if h <= 0.0 {
            return x;
        }
        match *self {
            Self::Constant => x,
            Self::LinearGaussian { a, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                let var = if (a * h).abs() < 1e-12 { sigma * sigma * h } else { sigma * sigma * (2.0 * a * h).exp_m1() / (2.0 * a) };
                x * (a * h).exp() + var.sqrt() * z
            }
            Self::Feller { r, gamma } => feller_step(x, r, gamma, h, rng),
        }
    }
}

/// Law of the offspring traits given the parent trait and the offspring count.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchKernel {
    /// Every child starts at the parent trait.
    Copy,
    /// Children at `x + σ ξ_j`, independent standard normals `ξ_j`.
    CopyWithNoise { sigma: f64 },
    /// Binary sharing `(θx, (1-θ)x)`; counts other than 2 copy the parent trait.
    Split(FractionLaw),
}

impl BranchKernel {
    /// Offspring traits, uniformly permuted.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, k: usize, rng: &mut R) -> Vec<f64> {
        let mut out = match self {
            Self::Copy => vec![x; k],
            Self::CopyWithNoise { sigma } => (0..k).map(|_| x + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)).collect(),
            Self::Split(f) if k == 2 => {
                let theta = f.sample(rng);
                let big = theta.max(1.0 - theta) * x;
                vec![big, x - big]
            }
            Self::Split(_) => vec![x; k],
        };
        out.shuffle(rng);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchingMarkovSpec {
    pub tau: f64,
    pub offspring: OffspringDist,
    pub motion: TraitMotion,
    pub kernel: BranchKernel,
}

impl BranchingMarkovSpec {
    pub fn new(tau: f64, offspring: OffspringDist, motion: TraitMotion, kernel: BranchKernel) -> Result<Self> {
        ensure(tau > 0.0 && tau.is_finite(), "tau", "must be positive")?;
        ensure(offspring.second_moment().is_finite(), "offspring", "second moment must be finite")?;
        Ok(Self { tau, offspring, motion, kernel })
    }

    /// Pure genealogy: constant traits.
    pub fn genealogy(tau: f64, offspring: OffspringDist) -> Result<Self> {
        Self::new(tau, offspring, TraitMotion::Constant, BranchKernel::Copy)
    }

    /// `E N_t = exp(τ (m - 1) t)`.
    #[must_use]
    pub fn mean_population(&self, t: f64) -> f64 {
        (self.tau * (self.offspring.mean() - 1.0) * t).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwNode {
    /// Word in positive integers; the root is empty.
    pub label: Vec<u32>,
    pub parent: Option<usize>,
    pub birth: f64,
    /// `birth + lifetime`; may exceed the horizon.
    pub death: f64,
    /// Offspring count, or `None` when the death is after the horizon.
    pub offspring: Option<usize>,
    pub trait_at_birth: f64,
    /// Trait at `min(death, horizon)`.
    pub trait_at_end: f64,
    /// Trait at the grid times `k dt` with `birth <= k dt < death`, `k dt <= horizon`.
    pub grid_values: Vec<f64>,
    pub first_grid_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwTree {
    pub nodes: Vec<GwNode>,
    pub horizon: f64,
    pub grid_dt: f64,
    /// Set when `max_nodes` stopped the construction; children past it were dropped.
    pub truncated: bool,
}

impl GwTree {
    /// Indices of the nodes alive at `t`.
    #[must_use]
    pub fn alive_at(&self, t: f64) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].birth <= t && t < self.nodes[i].death).collect()
    }

    #[must_use]
    pub fn count_at(&self, t: f64) -> usize {
        self.nodes.iter().filter(|n| n.birth <= t && t < n.death).count()
    }

    /// Traits of the nodes alive at grid time `k dt`.
    #[must_use]
    pub fn traits_at_grid(&self, k: usize) -> Vec<f64> {
        self.nodes
            .iter()
            .filter(|n| n.first_grid_index <= k && k < n.first_grid_index + n.grid_values.len())
            .map(|n| n.grid_values[k - n.first_grid_index])
            .collect()
    }

    /// Grid path `0..=k_end` of the lineage of node `i`.
    #[must_use]
    pub fn ancestral_grid_path(&self, i: usize, k_end: usize) -> Vec<f64> {
        let mut chain = vec![i];
        while let Some(p) = self.nodes[*chain.last().unwrap_or(&i)].parent {
            chain.push(p);
        }
        let mut out = Vec::with_capacity(k_end + 1);
        for &n in chain.iter().rev() {
            let node = &self.nodes[n];
            for (j, v) in node.grid_values.iter().enumerate() {
                if node.first_grid_index + j <= k_end && out.len() == node.first_grid_index + j {
                    out.push(*v);
                }
            }
        }
        out
    }
}

fn grid_index_ceil(t: f64, dt: f64) -> usize {
    let k = (t / dt).ceil();
    // guard against t = k dt landing one step late
    if k > 0.0 && ((k - 1.0) * dt - t).abs() < 1e-12 * dt.max(1.0) { (k - 1.0) as usize } else { k as usize }
}

/// Simulate a tree with traits. Each node draws from its own stream keyed by
/// its label, so a tree is reproducible regardless of construction order.
pub fn simulate_branching_markov(
    spec: &BranchingMarkovSpec,
    x0: f64,
    horizon: f64,
    grid_dt: f64,
    max_nodes: usize,
    stream: &RngStream,
) -> Result<GwTree> {
    ensure(horizon >= 0.0, "horizon", "must be non-negative")?;
    ensure(grid_dt > 0.0, "grid_dt", "must be positive")?;
    let n_grid = (horizon / grid_dt + 1e-9).floor() as usize;
    let mut tree = GwTree { nodes: Vec::new(), horizon, grid_dt, truncated: false };
    let mut queue: std::collections::VecDeque<(Vec<u32>, Option<usize>, f64, f64)> = std::collections::VecDeque::new();
    queue.push_back((Vec::new(), None, 0.0, x0));
    while let Some((label, parent, birth, x_birth)) = queue.pop_front() {
        let path: Vec<u64> = label.iter().map(|&d| u64::from(d)).collect();
        let mut rng: ChaCha8Rng = stream.derive_path(&path).rng();
        let life = -(1.0 - rng.random::<f64>()).ln() / spec.tau;
        let death = birth + life;
        let end = death.min(horizon);
        let mut x = x_birth;
        let mut t = birth;
        let first = grid_index_ceil(birth, grid_dt);
        let mut grid_values = Vec::new();
        let mut k = first;
        while k <= n_grid && (k as f64 * grid_dt) < death {
            let s = k as f64 * grid_dt;
            x = spec.motion.advance(x, s - t, &mut rng);
            t = s;
            grid_values.push(x);
            k += 1;
        }
        x = spec.motion.advance(x, end - t, &mut rng);
        let idx = tree.nodes.len();
        let mut node = GwNode {
            label: label.clone(),
            parent,
            birth,
            death,
            offspring: None,
            trait_at_birth: x_birth,
            trait_at_end: x,
            grid_values,
            first_grid_index: first,
        };
        if death <= horizon {
            let kids = spec.offspring.sample(&mut rng);
            node.offspring = Some(kids);
            let traits = spec.kernel.sample(x, kids, &mut rng);
            for (j, y) in traits.into_iter().enumerate() {
                if tree.nodes.len() + queue.len() + 1 > max_nodes {
                    tree.truncated = true;
                    break;
                }
                let mut l = label.clone();
                l.push(j as u32 + 1);
                queue.push_back((l, Some(idx), death, y));
            }
        }
        tree.nodes.push(node);
    }
    Ok(tree)
}

/// Genealogy only.
pub fn simulate_gw_genealogy(tau: f64, offspring: &OffspringDist, horizon: f64, max_nodes: usize, stream: &RngStream) -> Result<GwTree> {
    let spec = BranchingMarkovSpec::genealogy(tau, offspring.clone())?;
    simulate_branching_markov(&spec, 0.0, horizon, horizon.max(1e-9), max_nodes, stream)
}

/// Auxiliary single-lineage process on the grid `k dt <= horizon`: the trait
/// motion plus jumps at rate `jump_rate` (`τ m` for the identity) to one
/// uniformly chosen coordinate of `P^{(k)}(x, ·)` with `k` size-biased.
pub fn simulate_auxiliary(
    spec: &BranchingMarkovSpec,
    x0: f64,
    horizon: f64,
    grid_dt: f64,
    jump_rate: f64,
    stream: &RngStream,
) -> Result<Vec<f64>> {
    ensure(grid_dt > 0.0, "grid_dt", "must be positive")?;
    ensure(spec.offspring.mean() > 0.0, "offspring", "mean must be positive")?;
    let mut rng = stream.rng();
    let n_grid = (horizon / grid_dt + 1e-9).floor() as usize;
    let mut out = Vec::with_capacity(n_grid + 1);
    out.push(x0);
    let mut x = x0;
    let mut t = 0.0;
    let mut next_jump = if jump_rate > 0.0 { -(1.0 - rng.random::<f64>()).ln() / jump_rate } else { f64::INFINITY };
    for k in 1..=n_grid {
        let s = k as f64 * grid_dt;
        while next_jump < s {
            x = spec.motion.advance(x, next_jump - t, &mut rng);
            t = next_jump;
            let kids = spec.offspring.sample_size_biased(&mut rng);
            let traits = spec.kernel.sample(x, kids, &mut rng);
            x = traits[rng.random_range(0..traits.len())];
            next_jump += -(1.0 - rng.random::<f64>()).ln() / jump_rate;
        }
        x = spec.motion.advance(x, s - t, &mut rng);
        t = s;
        out.push(x);
    }
    Ok(out)
}

pub type PathFunctional = dyn Fn(&[f64]) -> f64 + Sync;

#[derive(Debug, Clone, PartialEq)]
pub struct ManyToOne {
    pub lhs: Summary,
    /// `e^{τ(m-1)t} E f(Y)`.
    pub rhs: Summary,
    pub z: f64,
    pub agree: bool,
}

/// `E Σ_{i∈V_t} f(ancestral path of i)` against `E N_t · E f(Y)`, with paths
/// sampled on the grid `k dt <= t`. `jump_rate_factor` is `m` for the identity.
#[allow(clippy::too_many_arguments)]
pub fn many_to_one_check(
    spec: &BranchingMarkovSpec,
    f: &PathFunctional,
    x0: f64,
    t: f64,
    grid_dt: f64,
    jump_rate_factor: f64,
    replicates: usize,
    seed: u64,
) -> Result<ManyToOne> {
    let k_end = (t / grid_dt + 1e-9).floor() as usize;
    let lhs: Vec<f64> = replicate(seed, replicates, |s| {
        simulate_branching_markov(spec, x0, t, grid_dt, usize::MAX, &s)
            .map(|tree| tree.alive_at(t).into_iter().map(|i| f(&tree.ancestral_grid_path(i, k_end))).sum::<f64>())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let scale = spec.mean_population(t);
    let rhs: Vec<f64> = replicate(seed ^ 0x3C3C_C3C3, replicates, |s| {
        simulate_auxiliary(spec, x0, t, grid_dt, spec.tau * jump_rate_factor, &s).map(|y| scale * f(&y))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let (lhs, rhs) = (Summary::of(&lhs), Summary::of(&rhs));
    let se = (lhs.stderr.powi(2) + rhs.stderr.powi(2)).sqrt();
    let z = if se > 0.0 { (lhs.mean - rhs.mean) / se } else if lhs.mean == rhs.mean { 0.0 } else { f64::INFINITY };
    Ok(ManyToOne { lhs, rhs, z, agree: z.abs() <= 3.0 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub t: f64,
    /// Mean over surviving replicates of `(1/N_t) Σ f(X^i_t)`.
    pub mean: f64,
    /// Cross-replicate standard deviation of the same average.
    pub sd: f64,
    pub survivors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnReport {
    pub rows: Vec<LlnRow>,
    pub extinct_fraction: f64,
    /// Trait of one uniformly chosen alive cell per surviving tree at the last time.
    pub final_traits: Vec<f64>,
}

/// Empirical population averages at the grid times `k dt`, `k = 1..=steps`,
/// conditioned on survival by discarding extinct replicates.
#[allow(clippy::too_many_arguments)]
pub fn lln_empirical(
    spec: &BranchingMarkovSpec,
    f: &(dyn Fn(f64) -> f64 + Sync),
    x0: f64,
    dt: f64,
    steps: usize,
    max_nodes: usize,
    replicates: usize,
    seed: u64,
) -> Result<LlnReport> {
    ensure(steps >= 1, "steps", "must be at least 1")?;
    let horizon = dt * steps as f64;
    let trees: Vec<GwTree> = replicate(seed, replicates, |s| simulate_branching_markov(spec, x0, horizon, dt, max_nodes, &s))
        .into_iter()
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for k in 1..=steps {
        let t = k as f64 * dt;
        let avgs: Vec<f64> = trees
            .iter()
            .filter(|tree| !tree.truncated)
            .filter_map(|tree| {
                let vals: Vec<f64> = tree.traits_at_grid(k).into_iter().map(f).collect();
                (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
            })
            .collect();
        let s = Summary::of(&avgs);
        rows.push(LlnRow { t, mean: s.mean, sd: s.sd, survivors: avgs.len() });
    }
    let extinct = trees.iter().filter(|tr| tr.traits_at_grid(steps).is_empty()).count();
    // one uniformly chosen cell per surviving tree keeps the pooled sample independent
    let final_traits = trees
        .iter()
        .enumerate()
        .filter(|(_, tr)| !tr.truncated)
        .filter_map(|(i, tr)| {
            let alive = tr.traits_at_grid(steps);
            let mut rng = RngStream::new(seed, i as u64).derive(tags::AUX).rng();
            (!alive.is_empty()).then(|| alive[rng.random_range(0..alive.len())])
        })
        .collect();
    Ok(LlnReport { rows, extinct_fraction: extinct as f64 / replicates as f64, final_traits })
}

/// Long auxiliary run: grid samples after a burn-in fraction, for `π(f)`.
pub fn auxiliary_long_run(spec: &BranchingMarkovSpec, x0: f64, length: f64, dt: f64, burn_in: f64, stream: &RngStream) -> Result<Vec<f64>> {
    let path = simulate_auxiliary(spec, x0, length, dt, spec.tau * spec.offspring.mean(), stream)?;
    let skip = (burn_in * path.len() as f64) as usize;
    Ok(path[skip..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn birth_death_times_chain() {
        let spec = BranchingMarkovSpec::genealogy(1.0, OffspringDist::new(vec![0.2, 0.0, 0.8]).unwrap()).unwrap();
        let tree = simulate_branching_markov(&spec, 0.0, 4.0, 4.0, 10_000, &RngStream::new(1, 0)).unwrap();
        for n in &tree.nodes {
            if let Some(p) = n.parent {
                assert_eq!(n.birth, tree.nodes[p].death);
                assert_eq!(n.label[..n.label.len() - 1], tree.nodes[p].label[..]);
            }
        }
    }

    #[test]
    fn all_die_at_first_event() {
        let p = OffspringDist::fixed(0).unwrap();
        for i in 0..20 {
            let tree = simulate_gw_genealogy(1.0, &p, 3.0, 100, &RngStream::new(2, i)).unwrap();
            assert_eq!(tree.nodes.len(), 1);
            assert!(tree.count_at(3.0) <= 1);
        }
    }

    #[test]
    fn constant_traits_stay_put() {
        let spec = BranchingMarkovSpec::genealogy(2.0, OffspringDist::fixed(2).unwrap()).unwrap();
        let tree = simulate_branching_markov(&spec, 0.7, 2.0, 0.1, 10_000, &RngStream::new(3, 0)).unwrap();
        assert!(tree.nodes.iter().all(|n| n.trait_at_end == 0.7 && n.grid_values.iter().all(|&v| v == 0.7)));
    }

    #[test]
    fn split_kernel_conserves_trait_sum() {
        let spec = BranchingMarkovSpec::new(
            1.0,
            OffspringDist::fixed(2).unwrap(),
            TraitMotion::Feller { r: 0.5, gamma: 1.0 },
            BranchKernel::Split(FractionLaw::beta(2.0, 2.0).unwrap()),
        )
        .unwrap();
        let tree = simulate_branching_markov(&spec, 2.0, 3.0, 0.5, 10_000, &RngStream::new(4, 0)).unwrap();
        for (i, n) in tree.nodes.iter().enumerate() {
            if n.offspring == Some(2) {
                let kids: Vec<&GwNode> = tree.nodes.iter().filter(|c| c.parent == Some(i)).collect();
                assert_eq!(kids[0].trait_at_birth + kids[1].trait_at_birth, n.trait_at_end);
            }
        }
    }

    #[test]
    fn ancestral_path_has_full_length() {
        let spec = BranchingMarkovSpec::new(1.0, OffspringDist::fixed(2).unwrap(), TraitMotion::LinearGaussian { a: 0.0, sigma: 1.0 }, BranchKernel::Copy).unwrap();
        let tree = simulate_branching_markov(&spec, 0.0, 2.0, 0.1, 10_000, &RngStream::new(5, 0)).unwrap();
        for i in tree.alive_at(2.0) {
            let p = tree.ancestral_grid_path(i, 20);
            assert_eq!(p.len(), 21);
            assert_eq!(p[0], 0.0);
        }
    }

    #[test]
    fn size_biased_frequencies() {
        let p = OffspringDist::new(vec![0.2, 0.1, 0.4, 0.3]).unwrap();
        let mut rng = RngStream::new(6, 0).rng();
        let mut counts = [0u64; 4];
        for _ in 0..50_000 {
            counts[p.sample_size_biased(&mut rng)] += 1;
        }
        let m = p.mean();
        let probs: Vec<f64> = p.probs().iter().enumerate().map(|(k, q)| k as f64 * q / m).collect();
        assert_eq!(counts[0], 0);
        let chi = crate::stats::chi_square_gof(&counts[1..], &probs[1..]);
        assert!(chi.p_value > 0.01, "{chi:?}");
    }
}
