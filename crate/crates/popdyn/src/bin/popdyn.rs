//! Command-line runner for the registered experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use popdyn::cli::config::{ConfigError, ExperimentConfig, Overrides, ENV_PREFIX};
use popdyn::cli::{registry, run_experiment};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "popdyn", version, about = "Seeded stochastic population dynamics experiments")]
#[command(after_help = "Any setting can be overridden by environment variables: POPDYN_EXPERIMENT, POPDYN_SEED, \
POPDYN_REPLICATES, POPDYN_OUT, POPDYN_THREADS and POPDYN_<SECTION>_<KEY> (for example POPDYN_BD_LAMBDA=2). \
Precedence: defaults < config file < environment < command-line flags.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment id; may instead be given in the config file.
    experiment: Option<String>,
    /// Config file with `key = value` lines and `[section]` headers.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    replicates: Option<u64>,
    /// Output directory; CSVs go to `<DIR>/<experiment>/`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment, write its CSVs and exit 0 if every check passes.
    Run(RunArgs),
    /// List the experiments in stable order.
    List,
    /// Resolve and range-check a configuration without running it.
    Validate(RunArgs),
}

fn resolve(a: &RunArgs) -> Result<ExperimentConfig, ConfigError> {
    let text = match &a.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| ConfigError::Io { path: p.display().to_string(), msg: e.to_string() })?),
        None => None,
    };
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    let cli = Overrides {
        experiment: a.experiment.clone(),
        seed: a.seed,
        replicates: a.replicates,
        out: a.out.clone(),
        threads: a.threads,
    };
    ExperimentConfig::load(text.as_deref(), &env, &cli)
}

fn run(a: &RunArgs) -> ExitCode {
    let cfg = match resolve(a) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("popdyn: invalid configuration: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("popdyn: cannot start worker pool: {e}");
            return ExitCode::from(EXIT_FAIL);
        }
    };
    let report = match pool.install(|| run_experiment(&cfg)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("popdyn: {} failed: {e}", cfg.experiment);
            return ExitCode::from(EXIT_FAIL);
        }
    };
    match report.write(&cfg.out) {
        Ok(files) => {
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("popdyn: cannot write results to {}: {e}", cfg.out.display());
            return ExitCode::from(EXIT_FAIL);
        }
    }
    for line in report.summary_lines() {
        println!("{line}");
    }
    if report.passed() {
        println!("{}: PASS", cfg.experiment);
        ExitCode::SUCCESS
    } else {
        println!("{}: FAIL", cfg.experiment);
        ExitCode::from(EXIT_FAIL)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::List => {
            for e in registry::all() {
                println!("{}\t{}", e.id, e.description);
            }
            ExitCode::SUCCESS
        }
        Command::Validate(a) => match resolve(&a) {
            Ok(cfg) => {
                print!("{}", cfg.to_text());
                println!("# config_hash = {}", cfg.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("popdyn: invalid configuration: {e}");
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Run(a) => run(&a),
    }
}
