//! The ordered experiment registry.

use super::config::{ExperimentConfig, ParamSpec};
use super::experiments as ex;
use super::report::Outcome;

/// A named, seeded, configurable experiment.
#[derive(Debug, Clone, Copy)]
pub struct Experiment {
    pub id: &'static str,
    /// Acceptance criterion this experiment reproduces, counted from 1.
    pub criterion: u8,
    pub description: &'static str,
    pub default_seed: u64,
    pub default_replicates: u64,
    pub min_replicates: u64,
    pub params: &'static [ParamSpec],
    pub run: fn(&ExperimentConfig) -> crate::Result<Outcome>,
}

const BIG: f64 = 1e6;
const BIG_INT: i64 = 1_000_000_000;

static BD_LINEAR: [ParamSpec; 6] = [
    ParamSpec::float("bd", "lambda", 1.5, 0.0, BIG, "per-capita birth rate"),
    ParamSpec::float("bd", "mu", 1.0, 0.0, BIG, "per-capita death rate"),
    ParamSpec::int("bd", "z0", 3, 0, 1_000_000, "initial population"),
    ParamSpec::float("bd", "horizon", 60.0, 0.0, BIG, "simulation horizon"),
    ParamSpec::int("bd", "stop_above", 200, 1, BIG_INT, "population treated as escaped"),
    ParamSpec::int("bd", "n_terms", 2000, 1, 10_000_000, "series truncation"),
];

static BD_TIME: [ParamSpec; 6] = [
    ParamSpec::float("bd", "lambda", 1.0, 0.0, BIG, "per-capita birth rate"),
    ParamSpec::float("bd", "mu", 1.0, 1e-9, BIG, "per-capita death rate"),
    ParamSpec::float("bd", "c", 1.0, 1e-9, BIG, "pairwise competition rate"),
    ParamSpec::int("bd", "n", 1, 1, 1_000_000, "initial population"),
    ParamSpec::int("bd", "n_terms", 400, 1, 10_000_000, "series truncation"),
    ParamSpec::int("bd", "top", 400, 2, 10_000_000, "state space cap of the linear solve"),
];

static SCALING_DET: [ParamSpec; 9] = [
    ParamSpec::float("scaling", "lambda", 2.0, 0.0, BIG, "per-capita birth rate"),
    ParamSpec::float("scaling", "mu", 1.0, 0.0, BIG, "per-capita death rate"),
    ParamSpec::float("scaling", "c", 0.5, 0.0, BIG, "competition rate before division by K"),
    ParamSpec::int("scaling", "k_small", 50, 1, 1_000_000, "smallest carrying capacity"),
    ParamSpec::int("scaling", "k_mid", 200, 1, 1_000_000, "middle carrying capacity"),
    ParamSpec::int("scaling", "k_large", 800, 1, 1_000_000, "largest carrying capacity"),
    ParamSpec::float("scaling", "x0", 1.0, 0.0, BIG, "initial density"),
    ParamSpec::float("scaling", "horizon", 10.0, 0.0, BIG, "supremum window"),
    ParamSpec::float("scaling", "grid_step", 0.05, 1e-6, BIG, "comparison grid spacing"),
];

static SCALING_ENV: [ParamSpec; 7] = [
    ParamSpec::float("scaling", "r", 1.0, 0.0, BIG, "mean growth rate"),
    ParamSpec::float("scaling", "c", 1.0, 1e-9, BIG, "competition rate"),
    ParamSpec::float("scaling", "sigma", 1.0, 1e-9, BIG, "environmental noise"),
    ParamSpec::float("scaling", "y0", 0.5, 1e-9, BIG, "initial density"),
    ParamSpec::float("scaling", "horizon", 200.0, 0.0, BIG, "run length"),
    ParamSpec::float("scaling", "step", 0.01, 1e-6, 1.0, "Euler step"),
    ParamSpec::float("scaling", "burn_in_fraction", 0.2, 0.0, 0.99, "discarded leading fraction"),
];

static CSBP_FELLER: [ParamSpec; 5] = [
    ParamSpec::float("csbp", "r", 0.5, -BIG, BIG, "growth rate"),
    ParamSpec::float("csbp", "gamma", 1.0, 1e-9, BIG, "diffusion coefficient"),
    ParamSpec::float("csbp", "z0", 1.0, 0.0, BIG, "initial mass"),
    ParamSpec::float("csbp", "step", 0.005, 1e-6, 1.0, "time step"),
    ParamSpec::float("csbp", "epsilon", 0.01, 1e-9, 1.0, "small-jump cutoff"),
];

static CSBP_STABLE: [ParamSpec; 8] = [
    ParamSpec::float("csbp", "r", 0.0, -BIG, BIG, "growth rate"),
    ParamSpec::float("csbp", "gamma", 0.0, 0.0, BIG, "diffusion coefficient"),
    ParamSpec::float("csbp", "c", 0.5, 1e-9, BIG, "jump intensity scale"),
    ParamSpec::float("csbp", "alpha", 1.5, 1.000_001, 1.999_999, "stability index"),
    ParamSpec::float("csbp", "z0", 1.0, 0.0, BIG, "initial mass"),
    ParamSpec::float("csbp", "t", 1.0, 0.0, BIG, "comparison time"),
    ParamSpec::float("csbp", "step", 0.005, 1e-6, 1.0, "time step"),
    ParamSpec::float("csbp", "epsilon", 0.005, 1e-9, 1.0, "small-jump cutoff"),
];

static CATASTROPHE: [ParamSpec; 15] = [
    ParamSpec::float("catastrophe", "fraction", 0.5, 1e-9, 1.0, "surviving fraction at a catastrophe"),
    ParamSpec::float("catastrophe", "tau", 1.0, 0.0, BIG, "catastrophe rate"),
    ParamSpec::float("catastrophe", "gamma", 1.0, 1e-9, BIG, "diffusion coefficient"),
    ParamSpec::float("catastrophe", "y0", 1.0, 1e-9, BIG, "initial mass"),
    ParamSpec::float("catastrophe", "r_strong", -0.1, -BIG, BIG, "strongly subcritical preset"),
    ParamSpec::float("catastrophe", "r_weak", 0.9, -BIG, BIG, "weak-region preset"),
    ParamSpec::float("catastrophe", "r_critical", std::f64::consts::LN_2, -BIG, BIG, "critical preset"),
    ParamSpec::float("catastrophe", "r_super", 1.0, -BIG, BIG, "supercritical preset"),
    ParamSpec::float("catastrophe", "strong_horizon", 10.0, 0.0, BIG, "survival curve horizon, strong preset"),
    ParamSpec::float("catastrophe", "strong_step", 0.25, 1e-6, BIG, "survival curve spacing, strong preset"),
    ParamSpec::float("catastrophe", "critical_horizon", 50.0, 0.0, BIG, "survival curve horizon, critical preset"),
    ParamSpec::float("catastrophe", "critical_step", 1.0, 1e-6, BIG, "survival curve spacing, critical preset"),
    ParamSpec::int("catastrophe", "critical_replicates", 20_000, 2, BIG_INT, "replicates of the critical curve"),
    ParamSpec::float("catastrophe", "tail_fraction", 0.4, 0.01, 1.0, "fitted tail window"),
    ParamSpec::flag("catastrophe", "keep_curves", true, "write survival curves"),
];

static SPLITTING: [ParamSpec; 11] = [
    ParamSpec::float("splitting", "r", 1.0, -BIG, BIG, "parasite growth rate"),
    ParamSpec::float("splitting", "gamma", 1.0, 1e-9, BIG, "parasite diffusion coefficient"),
    ParamSpec::float("splitting", "tau", 1.0, 1e-9, BIG, "cell division rate"),
    ParamSpec::float("splitting", "x0", 1.0, 0.0, BIG, "initial load"),
    ParamSpec::float("splitting", "fraction", 0.5, 1e-9, 0.999_999_999, "share inherited by the first daughter"),
    ParamSpec::float("splitting", "mean_horizon", 3.0, 1.0, 20.0, "last integer time of the mean check"),
    ParamSpec::float("splitting", "clearance_horizon", 40.0, 0.0, BIG, "horizon of the clearance check"),
    ParamSpec::float("splitting", "escape_load", 40.0, 1e-9, BIG, "total load treated as escaped"),
    ParamSpec::float("splitting", "identity_t", 2.0, 0.0, BIG, "time of the many-to-one check"),
    ParamSpec::float("splitting", "r_recover", 1.0, -BIG, BIG, "growth rate expected to recover"),
    ParamSpec::float("splitting", "r_proliferate", 2.0, -BIG, BIG, "growth rate expected to proliferate"),
];

static GWTREE: [ParamSpec; 7] = [
    ParamSpec::float("gwtree", "p0", 0.2, 0.0, 1.0, "probability of no offspring; two otherwise"),
    ParamSpec::float("gwtree", "tau", 1.0, 1e-9, BIG, "branching rate"),
    ParamSpec::float("gwtree", "horizon", 3.0, 1.0, 20.0, "last integer time of the mean check"),
    ParamSpec::float("gwtree", "sigma", 1.0, 0.0, BIG, "trait diffusion coefficient"),
    ParamSpec::float("gwtree", "birth_noise", 1.0, 0.0, BIG, "trait noise at birth"),
    ParamSpec::float("gwtree", "identity_t", 2.0, 0.0, BIG, "time of the path functional"),
    ParamSpec::float("gwtree", "grid_dt", 0.1, 1e-6, BIG, "path sampling grid"),
];

static STRUCTPOP: [ParamSpec; 9] = [
    ParamSpec::float("structpop", "k", 100.0, 1.0, 1e5, "carrying capacity scale"),
    ParamSpec::float("structpop", "p", 0.03, 0.0, 1.0, "mutation probability"),
    ParamSpec::float("structpop", "sigma", 0.1, 1e-6, 4.0, "mutation step"),
    ParamSpec::float("structpop", "x0", 1.2, 0.0, 4.0, "initial trait"),
    ParamSpec::float("structpop", "horizon", 1.0, 0.0, BIG, "run length"),
    ParamSpec::float("structpop", "k_large", 1000.0, 1.0, 1e5, "carrying capacity of the equilibrium run"),
    ParamSpec::float("structpop", "x_mono", 2.0, 0.0, 4.0, "trait of the equilibrium run"),
    ParamSpec::float("structpop", "mono_horizon", 8.0, 0.0, BIG, "equilibrium run length"),
    ParamSpec::float("structpop", "mono_burn_in", 4.0, 0.0, BIG, "discarded start of the equilibrium run"),
];

static PROPERTIES: [ParamSpec; 3] = [
    ParamSpec::float("properties", "ppm_rate", 3.0, 1e-9, 1e3, "point measure intensity"),
    ParamSpec::float("properties", "ppm_horizon", 2.0, 1e-9, 1e3, "point measure window"),
    ParamSpec::float("properties", "compensated_rate", 2.0, 1e-9, 1e3, "jump rate of the compensated integral"),
];

static EXPERIMENTS: [Experiment; 11] = [
    Experiment {
        id: "bd-extinction-linear",
        criterion: 1,
        description: "Linear birth-death extinction probability: series, closed form and Monte Carlo",
        default_seed: 101,
        default_replicates: 100_000,
        min_replicates: 2,
        params: &BD_LINEAR,
        run: ex::bd_extinction_linear,
    },
    Experiment {
        id: "bd-mean-extinction-time",
        criterion: 2,
        description: "Logistic birth-death mean extinction time: series, linear solve and Monte Carlo",
        default_seed: 102,
        default_replicates: 10_000,
        min_replicates: 2,
        params: &BD_TIME,
        run: ex::bd_mean_extinction_time,
    },
    Experiment {
        id: "scaling-deterministic-limit",
        criterion: 3,
        description: "Large-population logistic chain approaches its ODE limit",
        default_seed: 103,
        default_replicates: 400,
        min_replicates: 2,
        params: &SCALING_DET,
        run: ex::scaling_deterministic_limit,
    },
    Experiment {
        id: "scaling-random-env-stationary",
        criterion: 4,
        description: "Logistic diffusion in a random environment: stationary gamma moments",
        default_seed: 104,
        default_replicates: 200,
        min_replicates: 2,
        params: &SCALING_ENV,
        run: ex::scaling_random_env,
    },
    Experiment {
        id: "csbp-laplace-cross",
        criterion: 5,
        description: "Feller branching Laplace transform: ODE, Riccati closed form and SDE Monte Carlo",
        default_seed: 105,
        default_replicates: 20_000,
        min_replicates: 2,
        params: &CSBP_FELLER,
        run: ex::csbp_laplace_cross,
    },
    Experiment {
        id: "csbp-lamperti-equivalence",
        criterion: 6,
        description: "Stable branching: SDE paths and Lamperti time change agree in law",
        default_seed: 106,
        default_replicates: 20_000,
        min_replicates: 2,
        params: &CSBP_STABLE,
        run: ex::csbp_lamperti,
    },
    Experiment {
        id: "catastrophe-regimes",
        criterion: 7,
        description: "Feller diffusion with catastrophes: regime classifier and survival decay",
        default_seed: 107,
        default_replicates: 100_000,
        min_replicates: 2,
        params: &CATASTROPHE,
        run: ex::catastrophe_regimes,
    },
    Experiment {
        id: "splitting-identities",
        criterion: 8,
        description: "Parasites in dividing cells: mean load, clearance, many-to-one and recovery",
        default_seed: 108,
        default_replicates: 20_000,
        min_replicates: 2,
        params: &SPLITTING,
        run: ex::splitting_identities,
    },
    Experiment {
        id: "gwtree-many-to-one",
        criterion: 9,
        description: "Branching Markov process on a Galton-Watson tree: mean growth and many-to-one",
        default_seed: 109,
        default_replicates: 20_000,
        min_replicates: 2,
        params: &GWTREE,
        run: ex::gwtree_many_to_one,
    },
    Experiment {
        id: "structpop-ibm-soundness",
        criterion: 10,
        description: "Trait-structured individual-based model: null-event invariance, martingale, equilibrium",
        default_seed: 110,
        default_replicates: 200,
        min_replicates: 2,
        params: &STRUCTPOP,
        run: ex::structpop_soundness,
    },
    Experiment {
        id: "property-suites",
        criterion: 11,
        description: "Kernel, branching and conservation properties",
        default_seed: 111,
        default_replicates: 5000,
        min_replicates: 2,
        params: &PROPERTIES,
        run: ex::property_suites,
    },
];

/// All experiments in stable order.
#[must_use]
pub fn all() -> &'static [Experiment] {
    &EXPERIMENTS
}

#[must_use]
pub fn find(id: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.id == id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn one_experiment_per_criterion_with_unique_ids() {
        let ids: BTreeSet<_> = all().iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), all().len());
        let crits: Vec<u8> = all().iter().map(|e| e.criterion).collect();
        assert_eq!(crits, (1..=11).collect::<Vec<u8>>());
    }

    #[test]
    fn defaults_lie_in_range_and_keys_are_unique() {
        for e in all() {
            let paths: BTreeSet<_> = e.params.iter().map(ParamSpec::path).collect();
            assert_eq!(paths.len(), e.params.len(), "{}", e.id);
            assert!(e.default_replicates >= e.min_replicates);
            let cfg = ExperimentConfig::load(Some(&format!("experiment = {}\n", e.id)), &[], &Default::default()).unwrap();
            assert_eq!(cfg, ExperimentConfig::defaults(e));
            assert_eq!(ExperimentConfig::load(Some(&cfg.to_text()), &[], &Default::default()).unwrap(), cfg);
        }
    }
}
