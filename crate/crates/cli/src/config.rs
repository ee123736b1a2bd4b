use std::path::{Path, PathBuf};

use roughflow::fbm::Sampler;
use roughflow::flow::DriftSpec;
use roughflow::transport::{test_function_suite, InitialDatum};
use roughflow::{SmoothFn, TimeGrid};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Parameter grid for `sweep`; empty axes are left at the base value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    #[serde(rename = "H")]
    pub hurst: Vec<f64>,
    #[serde(rename = "N")]
    pub steps: Vec<usize>,
    /// Mollification levels.
    pub n: Vec<usize>,
    pub n_paths: Vec<usize>,
    #[serde(rename = "K")]
    pub cutoff: Vec<f64>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.hurst.is_empty() && self.steps.is_empty() && self.n.is_empty() && self.n_paths.is_empty() && self.cutoff.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(rename = "H")]
    pub hurst: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub steps: usize,
    pub seed: u64,
    pub n_paths: usize,
    /// Driver paths averaged by `weak-residual`.
    pub weak_paths: usize,
    pub sampler: Sampler,
    pub drift: DriftSpec,
    pub u0: InitialDatum,
    /// `standard` (six test functions) or `single` (one bump).
    pub eta_suite: String,
    pub out: PathBuf,
    /// Starting point for single-trajectory experiments.
    pub x0: f64,
    /// Spatial window for flows, transport snapshots and `y`-grids.
    pub domain: (f64, f64),
    /// Fourier cutoff for the local-time functional.
    #[serde(rename = "K")]
    pub cutoff: f64,
    pub y_nodes: usize,
    /// Drift for `ibp`; it must vanish at the edges of `ibp_window`.
    pub ibp_drift: DriftSpec,
    pub ibp_window: (f64, f64),
    /// Mollification levels for singular drifts.
    pub levels: Vec<usize>,
    pub sweep: SweepGrid,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            hurst: 0.25,
            gamma: 0.2,
            horizon: 1.0,
            steps: 1024,
            seed: 0,
            n_paths: 200,
            weak_paths: 8,
            sampler: Sampler::Circulant,
            drift: DriftSpec::Cos { amp: 1.0 },
            u0: InitialDatum::gaussian(0.0, 0.5),
            eta_suite: "standard".into(),
            out: PathBuf::from("out"),
            x0: 0.3,
            domain: (-4.0, 4.0),
            cutoff: 200.0,
            y_nodes: 1601,
            ibp_drift: DriftSpec::Bump { center: 0.0, radius: 1.5, amp: 1.0 },
            ibp_window: (-1.5, 1.5),
            levels: vec![8, 16, 32, 64],
            sweep: SweepGrid::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads JSON or TOML, chosen by extension.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            Some("json") => serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
            _ => return Err(CliError::Usage(format!("{}: config must be .json or .toml", path.display()))),
        };
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: &str| Err(CliError::Usage(format!("invalid config: {msg}")));
        if !(self.hurst > 0.0 && self.hurst <= 0.5) {
            return fail("H must lie in (0, 1/2]");
        }
        if !(self.gamma > 0.0 && self.gamma < self.hurst) {
            return fail("gamma < H violated");
        }
        let p = (1.0 / self.gamma + 1e-9).floor();
        if (p + 1.0) * self.gamma <= 1.0 {
            return fail("(floor(1/gamma)+1)*gamma > 1 violated");
        }
        if p > roughflow::rough::MAX_LEVEL as f64 {
            return fail("floor(1/gamma) <= 6 violated");
        }
        if self.steps < 2 || !self.steps.is_power_of_two() {
            return fail("N must be a power of 2");
        }
        if !(self.horizon > 0.0) {
            return fail("T must be positive");
        }
        if self.n_paths == 0 || self.weak_paths == 0 {
            return fail("n_paths and weak_paths must be positive");
        }
        if self.domain.1 <= self.domain.0 || self.ibp_window.1 <= self.ibp_window.0 {
            return fail("domain and ibp_window must be increasing pairs");
        }
        if !(self.cutoff > 0.0) {
            return fail("K must be positive");
        }
        if self.y_nodes < 3 {
            return fail("y_nodes must be at least 3");
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            return fail("levels must be non-empty and positive");
        }
        self.drift.validate().map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        self.ibp_drift.validate().map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        self.eta_functions()?;
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.steps).expect("validated grid")
    }

    pub fn eta_functions(&self) -> Result<Vec<SmoothFn>, CliError> {
        match self.eta_suite.as_str() {
            "standard" => Ok(test_function_suite()),
            "single" => Ok(vec![SmoothFn::bump(0.0, 1.0)]),
            other => Err(CliError::Usage(format!("invalid config: unknown eta suite {other:?}"))),
        }
    }

    /// Evenly spaced points of the spatial window.
    pub fn nodes(&self, count: usize) -> Vec<f64> {
        let (a, b) = self.domain;
        (0..count).map(|j| a + (b - a) * j as f64 / (count - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn gamma_above_hurst_names_the_invariant() {
        let cfg = ExperimentConfig { gamma: 0.3, ..Default::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("gamma < H"), "{err}");
    }

    #[test]
    fn non_dyadic_steps_are_rejected() {
        let cfg = ExperimentConfig { steps: 1000, ..Default::default() };
        assert!(cfg.validate().unwrap_err().to_string().contains("power of 2"));
    }

    #[test]
    fn toml_keys_round_trip() {
        let cfg: ExperimentConfig = toml::from_str("H = 0.2\ngamma = 0.15\nN = 256\n[drift]\nkind = \"sign\"\namp = 1.0\n").unwrap();
        assert_eq!(cfg.steps, 256);
        assert_eq!(cfg.drift, DriftSpec::Sign { amp: 1.0 });
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("hurst = 0.2\n").is_err());
    }
}
