//! Python bindings: the experiment registry, configuration checks, runs and a
//! few closed-form quantities.

use std::path::PathBuf;

use popdyn::bd::{extinction_prob, mean_extinction_time, RateSpec};
use popdyn::cli::config::{ExperimentConfig, Overrides};
use popdyn::cli::{registry, run_experiment};
use popdyn::csbp::feller_laplace_closed_form;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn runtime(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn invalid(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn load(experiment: Option<String>, config: Option<&str>, seed: Option<u64>, replicates: Option<u64>) -> PyResult<ExperimentConfig> {
    let cli = Overrides { experiment, seed, replicates, ..Overrides::default() };
    ExperimentConfig::load(config, &[], &cli).map_err(invalid)
}

/// `(id, description)` for every experiment, in stable order.
#[pyfunction]
fn list_experiments() -> Vec<(String, String)> {
    registry::all().iter().map(|e| (e.id.to_string(), e.description.to_string())).collect()
}

/// Canonical configuration text; raises ValueError on invalid input.
#[pyfunction]
#[pyo3(signature = (experiment=None, config=None, seed=None, replicates=None))]
fn validate(experiment: Option<String>, config: Option<&str>, seed: Option<u64>, replicates: Option<u64>) -> PyResult<String> {
    Ok(load(experiment, config, seed, replicates)?.to_text())
}

/// Runs an experiment. Returns `(passed, checks)` with one
/// `(id, target, estimate, stderr, pass)` tuple per check. CSVs are written
/// only when `out` is given.
#[pyfunction]
#[pyo3(signature = (experiment=None, config=None, seed=None, replicates=None, out=None))]
#[allow(clippy::type_complexity)]
fn run(
    py: Python<'_>,
    experiment: Option<String>,
    config: Option<&str>,
    seed: Option<u64>,
    replicates: Option<u64>,
    out: Option<PathBuf>,
) -> PyResult<(bool, Vec<(String, String, String, Option<f64>, bool)>)> {
    let cfg = load(experiment, config, seed, replicates)?;
    let report = py.detach(|| run_experiment(&cfg)).map_err(runtime)?;
    if let Some(dir) = out {
        report.write(&dir).map_err(runtime)?;
    }
    let rows = report.outcome.checks.iter().map(|c| (c.id.clone(), c.target.clone(), c.estimate.clone(), c.stderr, c.pass)).collect();
    Ok((report.passed(), rows))
}

/// Extinction probability of a linear birth-death chain started at `i`.
#[pyfunction]
#[pyo3(signature = (birth, death, i, n_terms=2000))]
fn linear_extinction_probability(birth: f64, death: f64, i: u64, n_terms: usize) -> PyResult<f64> {
    let spec = RateSpec::linear(birth, death).map_err(invalid)?;
    Ok(extinction_prob(&spec, i, n_terms).map_err(runtime)?.value)
}

/// Mean extinction time of the logistic chain started at `n`.
#[pyfunction]
#[pyo3(signature = (birth, death, competition, n, n_terms=400))]
fn logistic_mean_extinction_time(birth: f64, death: f64, competition: f64, n: u64, n_terms: usize) -> PyResult<f64> {
    let spec = RateSpec::logistic(birth, death, competition).map_err(invalid)?;
    Ok(mean_extinction_time(&spec, n, n_terms).map_err(runtime)?.value)
}

/// Laplace exponent u_t(λ) of the Feller branching diffusion.
#[pyfunction]
fn feller_laplace_exponent(r: f64, gamma: f64, t: f64, lambda: f64) -> f64 {
    feller_laplace_closed_form(r, gamma, t, lambda)
}

#[pymodule]
#[pyo3(name = "popdyn")]
fn popdyn_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(list_experiments, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(linear_extinction_probability, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_mean_extinction_time, m)?)?;
    m.add_function(wrap_pyfunction!(feller_laplace_exponent, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
