//! Run reports and CSV artifacts.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// One verdict line of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub id: String,
    pub target: String,
    pub estimate: String,
    pub stderr: Option<f64>,
    pub pass: bool,
}

impl CheckRow {
    #[must_use]
    pub fn numeric(id: impl Into<String>, target: f64, estimate: f64, stderr: Option<f64>, pass: bool) -> Self {
        Self { id: id.into(), target: num(target), estimate: num(estimate), stderr, pass }
    }

    #[must_use]
    pub fn text(id: impl Into<String>, target: impl Into<String>, estimate: impl Into<String>, pass: bool) -> Self {
        Self { id: id.into(), target: target.into(), estimate: estimate.into(), stderr: None, pass }
    }
}

/// Shortest round-trip representation, in exponent form for very small or
/// large magnitudes; deterministic across platforms.
#[must_use]
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// A named data table written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    #[must_use]
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| (*s).to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn push_nums(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| num(x)).collect());
    }
}

/// What an experiment produces before provenance is attached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub checks: Vec<CheckRow>,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: u64,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub provenance: Provenance,
    pub outcome: Outcome,
}

impl RunReport {
    #[must_use]
    pub fn passed(&self) -> bool {
        self.outcome.checks.iter().all(|c| c.pass)
    }

    /// `report.csv` (check, target, estimate, stderr, verdict), `provenance.csv`
    /// and one file per data table, under `<out>/<experiment>/`.
    pub fn write(&self, out: &Path) -> io::Result<Vec<PathBuf>> {
        let dir = out.join(&self.provenance.experiment);
        fs::create_dir_all(&dir)?;
        let mut written = Vec::new();
        let mut report = Table::new("report", &["check", "target", "estimate", "stderr", "verdict"]);
        for c in &self.outcome.checks {
            report.push(vec![
                c.id.clone(),
                c.target.clone(),
                c.estimate.clone(),
                c.stderr.map(num).unwrap_or_default(),
                if c.pass { "pass" } else { "fail" }.to_string(),
            ]);
        }
        let p = &self.provenance;
        let mut prov = Table::new("provenance", &["key", "value"]);
        for (k, v) in [
            ("experiment", p.experiment.clone()),
            ("config_hash", p.config_hash.clone()),
            ("seed", p.seed.to_string()),
            ("replicates", p.replicates.to_string()),
            ("code_version", p.code_version.clone()),
        ] {
            prov.push(vec![k.to_string(), v]);
        }
        for t in std::iter::once(&report).chain(std::iter::once(&prov)).chain(&self.outcome.tables) {
            let path = dir.join(format!("{}.csv", t.name));
            write_csv(&path, t)?;
            written.push(path);
        }
        Ok(written)
    }

    /// One line per check, for terminals.
    #[must_use]
    pub fn summary_lines(&self) -> Vec<String> {
        self.outcome
            .checks
            .iter()
            .map(|c| {
                let se = c.stderr.map(|s| format!(" (se {s:.3e})")).unwrap_or_default();
                format!(
                    "[{}] {}: estimate {} target {}{}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.id,
                    c.estimate,
                    c.target,
                    se
                )
            })
            .collect()
    }
}

fn write_csv(path: &Path, t: &Table) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(&t.header)?;
    for r in &t.rows {
        w.write_record(r)?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, 1.0, -0.25, 1.9e-13, 3e20, f64::MIN_POSITIVE, 0.1 + 0.2] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(1.9e-13), "1.9e-13");
        assert_eq!(num(0.5), "0.5");
    }

    #[test]
    fn writes_lf_csv_with_header() {
        let dir = std::env::temp_dir().join(format!("popdyn-report-{}", std::process::id()));
        let mut t = Table::new("data", &["k", "value"]);
        t.push_nums(&[1.0, 0.25]);
        t.push(vec!["a,b".into(), "x".into()]);
        let rep = RunReport {
            provenance: Provenance {
                experiment: "demo".into(),
                config_hash: "00".into(),
                seed: 1,
                replicates: 2,
                code_version: "0".into(),
            },
            outcome: Outcome { checks: vec![CheckRow::numeric("c", 1.0, 1.5, Some(0.5), true)], tables: vec![t] },
        };
        let files = rep.write(&dir).unwrap();
        assert_eq!(files.len(), 3);
        let data = fs::read_to_string(dir.join("demo/data.csv")).unwrap();
        assert_eq!(data, "k,value\n1,0.25\n\"a,b\",x\n");
        let report = fs::read_to_string(dir.join("demo/report.csv")).unwrap();
        assert_eq!(report, "check,target,estimate,stderr,verdict\nc,1,1.5,0.5,pass\n");
        fs::remove_dir_all(&dir).unwrap();
    }
}
