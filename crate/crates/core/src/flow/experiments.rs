//! Stability and mollification experiments on rough flows.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{flow_derivative, mollify, solve_flow, solve_inverse_flow, Drift};
use crate::error::Result;
use crate::fbm::{FbmConfig, FbmSampler, Sampler};
use crate::grid::TimeGrid;
use crate::rough::path_holder;
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub eps: f64,
    /// `||φ - φ~||_γ / ||X - X~||_γ`.
    pub forward: f64,
    /// Same ratio for the inverse flows at the horizon.
    pub inverse: f64,
}

/// Perturbs the driver by `ε sin(2πt/T)` and measures Hölder ratios of the flow gaps.
pub fn stability_experiment(
    drift: &dyn Drift,
    grid: &TimeGrid,
    driver: &[f64],
    x: f64,
    gamma: f64,
    eps: &[f64],
) -> Result<Vec<StabilityRow>> {
    let base = solve_flow(drift, grid, driver, &[x])?;
    let n = grid.steps();
    let y0 = base.phi[0][n];
    let base_inv = solve_inverse_flow(drift, grid, driver, n, &[y0])?;
    let period = grid.horizon();
    eps.iter()
        .map(|&e| {
            let bump: Vec<f64> = grid
                .times()
                .iter()
                .map(|t| e * (2.0 * std::f64::consts::PI * t / period).sin())
                .collect();
            let pert: Vec<f64> = driver.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let other = solve_flow(drift, grid, &pert, &[x])?;
            let other_inv = solve_inverse_flow(drift, grid, &pert, n, &[y0])?;
            let dx = path_holder(&bump, grid, gamma);
            let gap: Vec<f64> = base.phi[0].iter().zip(&other.phi[0]).map(|(a, b)| a - b).collect();
            let igap: Vec<f64> =
                base_inv.flow.phi[0].iter().zip(&other_inv.flow.phi[0]).map(|(a, b)| a - b).collect();
            Ok(StabilityRow {
                eps: e,
                forward: path_holder(&gap, grid, gamma) / dx,
                inverse: path_holder(&igap, &base_inv.flow.grid, gamma) / dx,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub n: usize,
    pub estimate: f64,
    pub stderr: f64,
}

/// Monte-Carlo `E[(∂_x φ_T(x))^2]` for the mollified drifts `b_n`, one fBm path per sample.
#[allow(clippy::too_many_arguments)]
pub fn derivative_moment_experiment(
    base: Arc<dyn Drift>,
    hurst: f64,
    grid: &TimeGrid,
    x: f64,
    levels: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<Vec<MomentRow>> {
    let sampler = FbmSampler::new(FbmConfig::new(hurst, *grid, seed, Sampler::Circulant)?)?;
    let drifts = levels.iter().map(|&n| mollify(base.clone(), n)).collect::<Result<Vec<_>>>()?;
    let per_path: Vec<Vec<f64>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let b = sampler.sample(id).values;
            drifts
                .iter()
                .map(|d| flow_derivative(d, grid, &b, x).map(|v| v[grid.steps()].powi(2)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(levels
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let col: Vec<f64> = per_path.iter().map(|r| r[k]).collect();
            let e = Estimate::from_samples(&col);
            MomentRow { n, estimate: e.mean, stderr: e.stderr }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub n: usize,
    pub m: usize,
    /// `||φ_n - φ_m||_γ` on the grid.
    pub gap: f64,
}

/// Hölder gaps between flows of consecutive mollification levels for one driver.
pub fn flow_convergence_experiment(
    base: Arc<dyn Drift>,
    grid: &TimeGrid,
    driver: &[f64],
    x: f64,
    gamma: f64,
    levels: &[usize],
) -> Result<Vec<CauchyRow>> {
    let flows = levels
        .iter()
        .map(|&n| solve_flow(&mollify(base.clone(), n)?, grid, driver, &[x]).map(|f| f.phi[0].clone()))
        .collect::<Result<Vec<_>>>()?;
    Ok(levels
        .windows(2)
        .zip(flows.windows(2))
        .map(|(ns, fs)| {
            let d: Vec<f64> = fs[0].iter().zip(&fs[1]).map(|(a, b)| a - b).collect();
            CauchyRow { n: ns[0], m: ns[1], gap: path_holder(&d, grid, gamma) }
        })
        .collect())
}

/// True when each entry is strictly below its predecessor.
pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
