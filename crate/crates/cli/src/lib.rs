//! Experiment runner: configuration, subcommands, sweeps and reports.

pub mod config;
pub mod experiments;
pub mod report;

use std::collections::BTreeMap;

use thiserror::Error;

pub use config::{ExperimentConfig, SweepGrid};
pub use experiments::{run, SUBCOMMANDS};
pub use report::{Check, RunReport, SweepReport, SweepRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] roughflow::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Cross product of the sweep axes, each row run with its own output directory.
pub fn sweep(name: &str, base: &ExperimentConfig) -> Result<SweepReport, CliError> {
    let start = std::time::Instant::now();
    let g = &base.sweep;
    let mut rows = Vec::new();
    if g.is_empty() {
        return Ok(SweepReport { subcommand: name.into(), rows, wall_clock_s: 0.0 });
    }
    fn axis<T: Copy>(v: &[T]) -> Vec<Option<T>> {
        if v.is_empty() {
            vec![None]
        } else {
            v.iter().map(|x| Some(*x)).collect()
        }
    }
    for h in axis(&g.hurst) {
        for n_steps in axis(&g.steps) {
            for level in axis(&g.n) {
                for paths in axis(&g.n_paths) {
                    for k in axis(&g.cutoff) {
                        let mut cfg = base.clone();
                        cfg.sweep = SweepGrid::default();
                        let mut params = BTreeMap::new();
                        if let Some(h) = h {
                            cfg.hurst = h;
                            params.insert("H".to_string(), h);
                        }
                        if let Some(n) = n_steps {
                            cfg.steps = n;
                            params.insert("N".to_string(), n as f64);
                        }
                        if let Some(l) = level {
                            cfg.levels = vec![l];
                            params.insert("n".to_string(), l as f64);
                        }
                        if let Some(p) = paths {
                            cfg.n_paths = p;
                            params.insert("n_paths".to_string(), p as f64);
                        }
                        if let Some(k) = k {
                            cfg.cutoff = k;
                            params.insert("K".to_string(), k);
                        }
                        let tag: Vec<String> = params.iter().map(|(k, v)| format!("{k}={v}")).collect();
                        cfg.out = base.out.join(tag.join("_"));
                        let rep = run(name, &cfg)?;
                        rows.push(SweepRow {
                            params,
                            pass: rep.passed(),
                            failing: rep.failing().into_iter().map(String::from).collect(),
                            metrics: rep.metrics,
                        });
                    }
                }
            }
        }
    }
    Ok(SweepReport { subcommand: name.into(), rows, wall_clock_s: start.elapsed().as_secs_f64() })
}
