use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub subcommand: String,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub wall_clock_s: f64,
    pub artifacts: Vec<PathBuf>,
}

impl RunReport {
    pub fn new(subcommand: &str, config: &ExperimentConfig) -> Self {
        Self {
            subcommand: subcommand.into(),
            config: config.clone(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            wall_clock_s: 0.0,
            artifacts: Vec::new(),
        }
    }

    /// Records a check; names must be unique within a report.
    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        assert!(self.checks.iter().all(|c| c.name != name), "duplicate check {name}");
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
    }

    /// Appends another report's checks, metrics and artifacts under `prefix.`.
    pub fn absorb(&mut self, other: RunReport) {
        let prefix = other.subcommand;
        for c in other.checks {
            self.check(&format!("{prefix}.{}", c.name), c.pass, c.detail);
        }
        for (k, v) in other.metrics {
            self.metrics.insert(format!("{prefix}.{k}"), v);
        }
        self.artifacts.extend(other.artifacts);
    }
}

/// One row of a sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: BTreeMap<String, f64>,
    pub pass: bool,
    pub failing: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub subcommand: String,
    pub rows: Vec<SweepRow>,
    pub wall_clock_s: f64,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}
