//! Experiment runner: typed configuration, the registry and CSV reports.

pub mod config;
pub mod experiments;
pub mod registry;
pub mod report;

use config::ExperimentConfig;
use report::{Provenance, RunReport};

/// Version string recorded in provenance.
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Runs the configured experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> crate::Result<RunReport> {
    let exp = registry::find(&cfg.experiment).expect("config loader only accepts registered ids");
    let outcome = (exp.run)(cfg)?;
    Ok(RunReport {
        provenance: Provenance {
            experiment: cfg.experiment.clone(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            replicates: cfg.replicates,
            code_version: CODE_VERSION.to_string(),
        },
        outcome,
    })
}
