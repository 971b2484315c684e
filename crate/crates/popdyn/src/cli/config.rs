//! Flat, typed key-value experiment configuration.
//!
//! ```text
//! # comment
//! experiment = bd-extinction-linear
//! seed = 42
//! replicates = 100000
//!
//! [bd]
//! lambda = 1.5
//! mu = 1.0
//! ```
//!
//! Top-level keys are `experiment`, `seed`, `replicates`, `out` and `threads`.
//! Section keys belong to the experiment's schema. Unknown keys, duplicate keys
//! and out-of-range values are errors. Environment variables named
//! `POPDYN_<SECTION>_<KEY>` (or `POPDYN_<KEY>` for top-level keys) override the
//! file; command-line flags override both.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::registry::{find, Experiment};

pub const ENV_PREFIX: &str = "POPDYN_";

const TOP_LEVEL: [&str; 5] = ["experiment", "seed", "replicates", "out", "threads"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("`{path}`: expected {expected}, got `{raw}`")]
    Type { path: String, expected: &'static str, raw: String },
    #[error("`{path}` = {value} is outside [{min}, {max}]")]
    Range { path: String, value: String, min: String, max: String },
    #[error("unknown experiment `{0}` (see `popdyn list`)")]
    UnknownExperiment(String),
    #[error("no experiment named on the command line or in the config")]
    MissingExperiment,
    #[error("cannot read config {path}: {msg}")]
    Io { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float { min: f64, max: f64 },
    Int { min: i64, max: i64 },
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    Bool(bool),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Float(x) => {
                // Keep a decimal point so the text re-parses as a float.
                if x.fract() == 0.0 && x.abs() < 1e15 {
                    write!(f, "{x:.1}")
                } else {
                    write!(f, "{x}")
                }
            }
            Self::Int(i) => write!(f, "{i}"),
            Self::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// One schema entry: `section.key` with its type, range and default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSpec {
    pub section: &'static str,
    pub key: &'static str,
    pub kind: Kind,
    pub default: Value,
    pub help: &'static str,
}

impl ParamSpec {
    #[must_use]
    pub const fn float(section: &'static str, key: &'static str, default: f64, min: f64, max: f64, help: &'static str) -> Self {
        Self { section, key, kind: Kind::Float { min, max }, default: Value::Float(default), help }
    }

    #[must_use]
    pub const fn int(section: &'static str, key: &'static str, default: i64, min: i64, max: i64, help: &'static str) -> Self {
        Self { section, key, kind: Kind::Int { min, max }, default: Value::Int(default), help }
    }

    #[must_use]
    pub const fn flag(section: &'static str, key: &'static str, default: bool, help: &'static str) -> Self {
        Self { section, key, kind: Kind::Bool, default: Value::Bool(default), help }
    }

    #[must_use]
    pub fn path(&self) -> String {
        format!("{}.{}", self.section, self.key)
    }

    fn parse(&self, raw: &str) -> Result<Value, ConfigError> {
        let path = self.path();
        let raw = raw.trim();
        match self.kind {
            Kind::Float { min, max } => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| ConfigError::Type { path: path.clone(), expected: "a number", raw: raw.into() })?;
                if !(v >= min && v <= max) {
                    return Err(ConfigError::Range { path, value: raw.into(), min: min.to_string(), max: max.to_string() });
                }
                Ok(Value::Float(v))
            }
            Kind::Int { min, max } => {
                let v: i64 = raw
                    .replace('_', "")
                    .parse()
                    .map_err(|_| ConfigError::Type { path: path.clone(), expected: "an integer", raw: raw.into() })?;
                if !(min..=max).contains(&v) {
                    return Err(ConfigError::Range { path, value: raw.into(), min: min.to_string(), max: max.to_string() });
                }
                Ok(Value::Int(v))
            }
            Kind::Bool => match raw {
                "true" => Ok(Value::Bool(true)),
                "false" => Ok(Value::Bool(false)),
                _ => Err(ConfigError::Type { path, expected: "true or false", raw: raw.into() }),
            },
        }
    }
}

/// Fully resolved configuration of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub replicates: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// `section.key` to value; always holds every schema entry.
    pub params: BTreeMap<String, Value>,
}

/// Settings given on the command line; `None` leaves lower layers in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub seed: Option<u64>,
    pub replicates: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

struct RawEntry {
    path: String,
    value: String,
    origin: String,
}

fn parse_text(text: &str) -> Result<Vec<RawEntry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line: line_no, msg: "unterminated section header".into() })?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(ConfigError::Syntax { line: line_no, msg: format!("bad section name `{name}`") });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: line_no, msg: "expected `key = value`".into() })?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::Syntax { line: line_no, msg: format!("bad key `{key}`") });
        }
        let value = value.trim().trim_matches('"').to_string();
        let path = match &section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        out.push(RawEntry { path, value, origin: format!("line {line_no}") });
    }
    Ok(out)
}

fn env_entries(env: &[(String, String)], schema: &[ParamSpec]) -> Result<Vec<RawEntry>, ConfigError> {
    let mut out = Vec::new();
    for (name, value) in env {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let lower = rest.to_ascii_lowercase();
        let path = if TOP_LEVEL.contains(&lower.as_str()) {
            lower
        } else if let Some(p) = schema.iter().find(|p| format!("{}_{}", p.section, p.key) == lower) {
            p.path()
        } else {
            return Err(ConfigError::UnknownKey(name.clone()));
        };
        out.push(RawEntry { path, value: value.clone(), origin: name.clone() });
    }
    Ok(out)
}

fn parse_u64(path: &str, raw: &str, min: u64) -> Result<u64, ConfigError> {
    let v: u64 = raw
        .trim()
        .replace('_', "")
        .parse()
        .map_err(|_| ConfigError::Type { path: path.into(), expected: "a non-negative integer", raw: raw.into() })?;
    if v < min {
        return Err(ConfigError::Range { path: path.into(), value: raw.into(), min: min.to_string(), max: u64::MAX.to_string() });
    }
    Ok(v)
}

impl ExperimentConfig {
    /// Defaults of `exp` with no overrides.
    #[must_use]
    pub fn defaults(exp: &Experiment) -> Self {
        Self {
            experiment: exp.id.to_string(),
            seed: exp.default_seed,
            replicates: exp.default_replicates,
            out: PathBuf::from("results"),
            threads: None,
            params: exp.params.iter().map(|p| (p.path(), p.default)).collect(),
        }
    }

    /// Layers defaults, config text, environment and command-line overrides.
    pub fn load(text: Option<&str>, env: &[(String, String)], cli: &Overrides) -> Result<Self, ConfigError> {
        let file = match text {
            Some(t) => parse_text(t)?,
            None => Vec::new(),
        };
        let named_in_env = env.iter().find(|(k, _)| k == &format!("{ENV_PREFIX}EXPERIMENT")).map(|(_, v)| v.clone());
        let named_in_file = file.iter().find(|e| e.path == "experiment").map(|e| e.value.clone());
        let id = cli.experiment.clone().or(named_in_env).or(named_in_file).ok_or(ConfigError::MissingExperiment)?;
        let exp = find(&id).ok_or_else(|| ConfigError::UnknownExperiment(id.clone()))?;
        let mut cfg = Self::defaults(exp);
        let mut seen = std::collections::BTreeSet::new();
        for e in file {
            if !seen.insert(e.path.clone()) {
                return Err(ConfigError::Duplicate(e.path));
            }
            cfg.apply(exp, &e)?;
        }
        for e in env_entries(env, exp.params)? {
            cfg.apply(exp, &e)?;
        }
        cfg.experiment = exp.id.to_string();
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(r) = cli.replicates {
            if r < exp.min_replicates {
                return Err(ConfigError::Range {
                    path: "replicates".into(),
                    value: r.to_string(),
                    min: exp.min_replicates.to_string(),
                    max: u64::MAX.to_string(),
                });
            }
            cfg.replicates = r;
        }
        if let Some(o) = &cli.out {
            cfg.out = o.clone();
        }
        if cli.threads.is_some() {
            cfg.threads = cli.threads;
        }
        if cfg.threads == Some(0) {
            return Err(ConfigError::Range { path: "threads".into(), value: "0".into(), min: "1".into(), max: "inf".into() });
        }
        Ok(cfg)
    }

    fn apply(&mut self, exp: &Experiment, e: &RawEntry) -> Result<(), ConfigError> {
        match e.path.as_str() {
            "experiment" => {
                if e.value != exp.id {
                    // The command line named a different experiment than the file.
                    find(&e.value).ok_or_else(|| ConfigError::UnknownExperiment(e.value.clone()))?;
                }
            }
            "seed" => self.seed = parse_u64("seed", &e.value, 0)?,
            "replicates" => self.replicates = parse_u64("replicates", &e.value, exp.min_replicates)?,
            "out" => self.out = PathBuf::from(&e.value),
            "threads" => self.threads = Some(parse_u64("threads", &e.value, 1)? as usize),
            path => {
                let spec = exp
                    .params
                    .iter()
                    .find(|p| p.path() == path)
                    .ok_or_else(|| ConfigError::UnknownKey(format!("{path} ({})", e.origin)))?;
                self.params.insert(spec.path(), spec.parse(&e.value)?);
            }
        }
        Ok(())
    }

    /// Canonical text: re-parses to the same configuration.
    #[must_use]
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "experiment = {}\nseed = {}\nreplicates = {}\nout = {}\n",
            self.experiment,
            self.seed,
            self.replicates,
            self.out.display()
        );
        if let Some(t) = self.threads {
            s.push_str(&format!("threads = {t}\n"));
        }
        let mut section = "";
        for (path, v) in &self.params {
            let (sec, key) = path.split_once('.').expect("section.key");
            if sec != section {
                s.push_str(&format!("\n[{sec}]\n"));
                section = sec;
            }
            s.push_str(&format!("{key} = {v}\n"));
        }
        s
    }

    /// SHA-256 of everything that affects results (not `out` or `threads`).
    #[must_use]
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        c.threads = None;
        hex::encode(Sha256::digest(c.to_text().as_bytes()))
    }

    #[must_use]
    pub fn f(&self, path: &str) -> f64 {
        match self.params.get(path) {
            Some(Value::Float(x)) => *x,
            Some(Value::Int(i)) => *i as f64,
            other => panic!("schema has no float `{path}`: {other:?}"),
        }
    }

    #[must_use]
    pub fn int(&self, path: &str) -> i64 {
        match self.params.get(path) {
            Some(Value::Int(i)) => *i,
            other => panic!("schema has no integer `{path}`: {other:?}"),
        }
    }

    #[must_use]
    pub fn usize(&self, path: &str) -> usize {
        usize::try_from(self.int(path)).expect("range-checked non-negative")
    }

    #[must_use]
    pub fn flag(&self, path: &str) -> bool {
        match self.params.get(path) {
            Some(Value::Bool(b)) => *b,
            other => panic!("schema has no flag `{path}`: {other:?}"),
        }
    }

    #[must_use]
    pub fn reps(&self) -> usize {
        usize::try_from(self.replicates).unwrap_or(usize::MAX)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::load(Some(text), &[], &Overrides::default())
    }

    #[test]
    fn parses_sections_and_types() {
        let c = load("experiment = bd-extinction-linear\nseed = 7\n\n[bd]\nlambda = 2.5 # faster\nz0 = 4\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.f("bd.lambda"), 2.5);
        assert_eq!(c.int("bd.z0"), 4);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        assert!(matches!(load("experiment = bd-extinction-linear\n[bd]\nlamda = 1\n"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(
            load("experiment = bd-extinction-linear\n[bd]\nmu = 1\nmu = 2\n"),
            Err(ConfigError::Duplicate(_))
        ));
        assert!(matches!(load("experiment = nope\n"), Err(ConfigError::UnknownExperiment(_))));
        assert!(matches!(load("seed = 1\n"), Err(ConfigError::MissingExperiment)));
    }

    #[test]
    fn range_and_type_errors_name_the_field() {
        let e = load("experiment = bd-extinction-linear\n[bd]\nmu = -1\n").unwrap_err();
        assert!(e.to_string().contains("bd.mu"), "{e}");
        let e = load("experiment = bd-extinction-linear\n[bd]\nz0 = 1.5\n").unwrap_err();
        assert!(matches!(e, ConfigError::Type { .. }));
        let e = load("experiment = bd-extinction-linear\nreplicates = 0\n").unwrap_err();
        assert!(matches!(e, ConfigError::Range { .. }));
    }

    #[test]
    fn env_then_cli_override_file() {
        let env = vec![
            ("POPDYN_BD_MU".to_string(), "0.5".to_string()),
            ("POPDYN_SEED".to_string(), "99".to_string()),
            ("OTHER".to_string(), "x".to_string()),
        ];
        let cli = Overrides { seed: Some(3), ..Overrides::default() };
        let c = ExperimentConfig::load(Some("experiment = bd-extinction-linear\nseed = 1\n[bd]\nmu = 0.9\n"), &env, &cli).unwrap();
        assert_eq!(c.f("bd.mu"), 0.5);
        assert_eq!(c.seed, 3);
        let bad = vec![("POPDYN_BD_NOPE".to_string(), "1".to_string())];
        assert!(ExperimentConfig::load(Some("experiment = bd-extinction-linear\n"), &bad, &Overrides::default()).is_err());
    }

    #[test]
    fn canonical_text_round_trips() {
        let c = load("experiment = bd-extinction-linear\nthreads = 2\n[bd]\nlambda = 3\n").unwrap();
        let back = load(&c.to_text()).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.hash(), back.hash());
        let mut moved = c.clone();
        moved.out = PathBuf::from("elsewhere");
        assert_eq!(c.hash(), moved.hash());
    }
}
