//! The rough transport equation `∂_t u + b ∂_x u + ∂_x u Ẋ = 0`: solution by
//! characteristics and the verifier for its weak controlled formulation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controlled::{measure_lift, rough_integral, SignedMeasure};
use crate::error::{param, Error, Result};
use crate::fbm::{FbmConfig, FbmSampler, Sampler};
use crate::flow::{mollify, solve_flow, solve_inverse_flow, Drift, FlowField};
use crate::functions::{Smooth, SmoothFn};
use crate::grid::TimeGrid;
use crate::quad::{simpson, trapezoid_weights};
use crate::rough::{geometric_lift, path_holder, RoughPath};

/// Default Simpson node count for spatial integrals.
pub const SPACE_NODES: usize = 401;
/// Simpson node count for the lifted initial measure.
pub const MEASURE_NODES: usize = 2001;

/// Initial datum `u0` with the interval carrying the mass of `u0'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDatum {
    pub u0: SmoothFn,
    pub support: (f64, f64),
}

impl InitialDatum {
    /// Gaussian bump; its derivative is negligible beyond ten widths.
    pub fn gaussian(center: f64, width: f64) -> Self {
        Self {
            u0: SmoothFn::Gaussian { center, width, amp: 1.0 },
            support: (center - 10.0 * width, center + 10.0 * width),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self { u0: SmoothFn::Constant { value }, support: (0.0, 0.0) }
    }

    pub fn bump(center: f64, radius: f64) -> Self {
        Self { u0: SmoothFn::bump(center, radius), support: (center - radius, center + radius) }
    }

    /// `∫ |u0'|` on Simpson nodes.
    pub fn derivative_mass(&self) -> f64 {
        let (y, w) = simpson(self.support.0, self.support.1, SPACE_NODES);
        y.iter().zip(&w).map(|(y, w)| w * self.u0.derivative(*y).abs()).sum()
    }
}

/// Five bumps of varying centre and width plus one sine-windowed bump.
pub fn test_function_suite() -> Vec<SmoothFn> {
    vec![
        SmoothFn::bump(0.0, 1.0),
        SmoothFn::bump(0.5, 0.75),
        SmoothFn::bump(-0.5, 1.0),
        SmoothFn::bump(1.0, 1.5),
        SmoothFn::bump(-1.0, 0.6),
        SmoothFn::SineBump { center: 0.0, radius: 1.2, freq: 2.0 },
    ]
}

/// `u(t_i, x) = u0(ψ^{t_i}_{t_i}(x))` at selected times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportSolution {
    pub grid: TimeGrid,
    pub x: Vec<f64>,
    pub t_indices: Vec<usize>,
    pub values: Vec<Vec<f64>>,
}

impl TransportSolution {
    pub fn range(&self) -> (f64, f64) {
        self.values.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Characteristics: one inverse flow per requested time.
pub fn solve_transport(
    datum: &InitialDatum,
    drift: &dyn Drift,
    grid: &TimeGrid,
    driver: &[f64],
    x: &[f64],
    t_indices: &[usize],
) -> Result<TransportSolution> {
    let values = t_indices
        .iter()
        .map(|&t| {
            if t > grid.steps() {
                return Err(Error::Extrapolation(format!("time index {t} is beyond the grid")));
            }
            let pre: Vec<f64> = match t {
                0 => x.to_vec(),
                1 => return param("time index 1 leaves a single step; use 0 or at least 2"),
                _ => solve_inverse_flow(drift, grid, driver, t, x)?.endpoint(),
            };
            Ok(pre.iter().map(|&p| datum.u0.value(p)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(TransportSolution { grid: *grid, x: x.to_vec(), t_indices: t_indices.to_vec(), values })
}

/// Finite-difference residual of `∂_t u + b ∂_x u + ∂_x u Ẋ` on interior nodes, maximised.
pub fn classical_residual(
    datum: &InitialDatum,
    drift: &dyn Drift,
    grid: &TimeGrid,
    driver: &[f64],
    x: &[f64],
    t_index: usize,
) -> Result<f64> {
    if t_index < 3 || t_index + 1 > grid.steps() {
        return param("classical residual needs 3 <= t_index < N");
    }
    let sol = solve_transport(datum, drift, grid, driver, x, &[t_index - 1, t_index, t_index + 1])?;
    let dt = grid.dt();
    let xdot = (driver[t_index + 1] - driver[t_index - 1]) / (2.0 * dt);
    let t = grid.time(t_index);
    let mut worst = 0.0f64;
    for j in 1..x.len() - 1 {
        let ut = (sol.values[2][j] - sol.values[0][j]) / (2.0 * dt);
        let ux = (sol.values[1][j + 1] - sol.values[1][j - 1]) / (x[j + 1] - x[j - 1]);
        worst = worst.max((ut + drift.eval(t, x[j]) * ux + ux * xdot).abs());
    }
    Ok(worst)
}

/// The four terms of the tested equation and their normalised imbalance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakResidual {
    /// `∫ u(t, x) η(x) dx`.
    pub t1: f64,
    /// `∫_0^t ∫ u0'(y) (bη)(r, φ_r(y)) dy dr`.
    pub t2: f64,
    /// Rough integral of `r ↦ -∫ u0'(y) η(φ_r(y)) dy` against the driver.
    pub t3: f64,
    /// `∫ u0 η dx`.
    pub t4: f64,
    /// `|T1 + T2 - T3 - T4| / max |T_i|`.
    pub residual: f64,
    /// `|∫ u(t) η' dx + ∫ u0'(y) η(φ_t(y)) dy|` relative to `∫ |u(t) η'| dx`.
    pub duality_gap: f64,
}

/// Precomputed forward flow from the nodes of `-u0'` and the driver lift.
pub struct WeakSolver<'a> {
    pub datum: &'a InitialDatum,
    pub drift: &'a dyn Drift,
    pub grid: TimeGrid,
    pub driver: Vec<f64>,
    pub lift: Arc<RoughPath>,
    pub domain: (f64, f64),
    mu: SignedMeasure,
    flow: FlowField,
}

impl<'a> WeakSolver<'a> {
    pub fn new(
        datum: &'a InitialDatum,
        drift: &'a dyn Drift,
        grid: &TimeGrid,
        driver: &[f64],
        gamma: f64,
        domain: (f64, f64),
    ) -> Result<Self> {
        let lift = Arc::new(geometric_lift(grid, driver, gamma)?);
        let u0 = datum.u0.clone();
        let mu = SignedMeasure::from_density(|y| -u0.derivative(y), datum.support.0, datum.support.1, MEASURE_NODES);
        let flow = solve_flow(drift, grid, driver, &mu.nodes)?;
        Ok(Self { datum, drift, grid: *grid, driver: driver.to_vec(), lift, domain, mu, flow })
    }

    pub fn flow(&self) -> &FlowField {
        &self.flow
    }

    /// The drift term `T2` at time index `t`.
    pub fn drift_term(&self, eta: &dyn Smooth, t: usize) -> f64 {
        let ws = trapezoid_weights(t + 1, self.grid.dt());
        ws.iter()
            .enumerate()
            .map(|(i, w)| {
                let r = self.grid.time(i);
                let inner: f64 = self
                    .mu
                    .weights
                    .iter()
                    .zip(&self.flow.phi)
                    .map(|(m, phi)| {
                        let p = phi[i];
                        -m * self.drift.eval(r, p) * eta.value(p)
                    })
                    .sum();
                w * inner
            })
            .sum()
    }

    pub fn residual(&self, eta: &SmoothFn, t: usize) -> Result<WeakResidual> {
        let (a, b) = eta
            .support()
            .ok_or_else(|| Error::Input("test function must have compact support".into()))?;
        if a < self.domain.0 || b > self.domain.1 {
            return Err(Error::Input(format!("test function support [{a}, {b}] escapes the x-grid")));
        }
        if t > self.grid.steps() {
            return Err(Error::Extrapolation(format!("time index {t} is beyond the grid")));
        }
        let (xs, wx) = simpson(a, b, SPACE_NODES);
        let t4: f64 = xs.iter().zip(&wx).map(|(x, w)| w * self.datum.u0.value(*x) * eta.value(*x)).sum();
        let pre = if t == 0 { xs.clone() } else { solve_inverse_flow(self.drift, &self.grid, &self.driver, t, &xs)?.endpoint() };
        let u: Vec<f64> = pre.iter().map(|p| self.datum.u0.value(*p)).collect();
        let t1: f64 = u.iter().zip(&xs).zip(&wx).map(|((u, x), w)| w * u * eta.value(*x)).sum();
        let weak_lhs: f64 = u.iter().zip(&xs).zip(&wx).map(|((u, x), w)| w * u * eta.derivative(*x)).sum();
        let weak_rhs: f64 = self.mu.weights.iter().zip(&self.flow.phi).map(|(m, phi)| m * eta.value(phi[t])).sum();
        let mass: f64 = u.iter().zip(&xs).zip(&wx).map(|((u, x), w)| w * (u * eta.derivative(*x)).abs()).sum();
        let duality_gap = (weak_lhs - weak_rhs).abs() / mass.max(1e-300);
        let t2 = self.drift_term(eta, t);
        let lifted = measure_lift(eta, &self.flow, &self.mu, self.lift.clone())?;
        let t3 = rough_integral(&lifted)?.path[t];
        let scale = [t1, t2, t3, t4].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let residual = if scale == 0.0 { 0.0 } else { (t1 + t2 - t3 - t4).abs() / scale };
        Ok(WeakResidual { t1, t2, t3, t4, residual, duality_gap })
    }
}

/// One-shot weak residual at the horizon.
pub fn weak_residual(
    datum: &InitialDatum,
    drift: &dyn Drift,
    grid: &TimeGrid,
    driver: &[f64],
    gamma: f64,
    eta: &SmoothFn,
    domain: (f64, f64),
) -> Result<WeakResidual> {
    WeakSolver::new(datum, drift, grid, driver, gamma, domain)?.residual(eta, grid.steps())
}

/// Samples every `factor`-th point of a fine path.
pub fn subsample(path: &[f64], factor: usize) -> Vec<f64> {
    path.iter().step_by(factor).cloned().collect()
}

/// Piecewise-linear interpolation of the driver through every `factor`-th grid point.
pub fn piecewise_linear(path: &[f64], factor: usize) -> Vec<f64> {
    let n = path.len() - 1;
    (0..=n)
        .map(|i| {
            let a = (i / factor) * factor;
            let b = (a + factor).min(n);
            if a == b {
                path[a]
            } else {
                let lam = (i - a) as f64 / (b - a) as f64;
                path[a] + lam * (path[b] - path[a])
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularRow {
    /// Mesh of the piecewise-linear approximation.
    pub eps: f64,
    pub driver_gap: f64,
    /// `|∫ Z^ε dX^ε - T3|` with the Stieltjes sum on the smooth approximation.
    pub t3_gap: f64,
    pub t1_gap: f64,
    /// `t1_gap / driver_gap`.
    pub t1_constant: f64,
}

/// Smooth-driver approximations at coarser meshes against the rough terms.
#[allow(clippy::too_many_arguments)]
pub fn regular_existence_experiment(
    datum: &InitialDatum,
    drift: &dyn Drift,
    grid: &TimeGrid,
    driver: &[f64],
    gamma: f64,
    eta: &SmoothFn,
    domain: (f64, f64),
    factors: &[usize],
) -> Result<Vec<RegularRow>> {
    let rough = WeakSolver::new(datum, drift, grid, driver, gamma, domain)?;
    let n = grid.steps();
    let base = rough.residual(eta, n)?;
    factors
        .iter()
        .map(|&f| {
            let smooth = piecewise_linear(driver, f);
            let approx = WeakSolver::new(datum, drift, grid, &smooth, gamma, domain)?;
            let z: Vec<f64> = (0..=n)
                .map(|i| approx.mu.weights.iter().zip(&approx.flow.phi).map(|(m, p)| m * eta.value(p[i])).sum())
                .collect();
            let stieltjes: f64 =
                z.windows(2).zip(smooth.windows(2)).map(|(a, b)| 0.5 * (a[0] + a[1]) * (b[1] - b[0])).sum();
            let res = approx.residual(eta, n)?;
            let gap: Vec<f64> = driver.iter().zip(&smooth).map(|(a, b)| a - b).collect();
            let driver_gap = path_holder(&gap, grid, gamma);
            let t1_gap = (res.t1 - base.t1).abs();
            Ok(RegularRow {
                eps: f as f64 * grid.dt(),
                driver_gap,
                t3_gap: (stieltjes - base.t3).abs(),
                t1_gap,
                t1_constant: if driver_gap > 0.0 { t1_gap / driver_gap } else { 0.0 },
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSeed {
    pub seed: u64,
    pub levels: Vec<usize>,
    pub residuals: Vec<f64>,
    pub drift_terms: Vec<f64>,
    pub duality_gaps: Vec<f64>,
    /// `|T2(n_{k+1}) - T2(n_k)|`.
    pub cauchy_gaps: Vec<f64>,
    pub monotone: bool,
}

/// Mollified discontinuous drift: per seed and level, the weak residual and drift-term Cauchy gaps.
#[allow(clippy::too_many_arguments)]
pub fn singular_existence_experiment(
    base: Arc<dyn Drift>,
    hurst: f64,
    gamma: f64,
    grid: &TimeGrid,
    seeds: &[u64],
    levels: &[usize],
    datum: &InitialDatum,
    eta: &SmoothFn,
    domain: (f64, f64),
) -> Result<Vec<SingularSeed>> {
    if hurst >= 1.0 / 3.0 || gamma >= hurst {
        return param("singular experiment needs gamma < H < 1/3");
    }
    let drifts = levels.iter().map(|&n| mollify(base.clone(), n)).collect::<Result<Vec<_>>>()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let sampler = FbmSampler::new(FbmConfig::new(hurst, *grid, seed, Sampler::Circulant)?)?;
            let path = sampler.sample(0).values;
            let mut residuals = Vec::new();
            let mut drift_terms = Vec::new();
            let mut duality_gaps = Vec::new();
            for d in &drifts {
                let solver = WeakSolver::new(datum, d, grid, &path, gamma, domain)?;
                let r = solver.residual(eta, grid.steps())?;
                residuals.push(r.residual);
                drift_terms.push(r.t2);
                duality_gaps.push(r.duality_gap);
            }
            let cauchy_gaps: Vec<f64> = drift_terms.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
            let monotone = crate::flow::experiments::strictly_decreasing(&cauchy_gaps);
            Ok(SingularSeed {
                seed,
                levels: levels.to_vec(),
                residuals,
                drift_terms,
                duality_gaps,
                cauchy_gaps,
                monotone,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::DriftSpec;

    const DOMAIN: (f64, f64) = (-3.0, 3.0);

    fn smooth_driver(g: &TimeGrid) -> Vec<f64> {
        g.times().iter().map(|t| 0.4 * (3.0 * t).sin()).collect()
    }

    #[test]
    fn no_motion_keeps_the_datum() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let d = InitialDatum::gaussian(0.0, 0.5);
        let x: Vec<f64> = (0..11).map(|j| -1.0 + 0.2 * j as f64).collect();
        let s = solve_transport(&d, &DriftSpec::Zero, &g, &[0.0; 17], &x, &[0, 8, 16]).unwrap();
        for row in &s.values {
            for (u, x) in row.iter().zip(&x) {
                assert!((u - d.u0.value(*x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn driver_translates_the_datum() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let drv = smooth_driver(&g);
        let d = InitialDatum::gaussian(0.0, 0.5);
        let x: Vec<f64> = (0..11).map(|j| -1.0 + 0.2 * j as f64).collect();
        let s = solve_transport(&d, &DriftSpec::Zero, &g, &drv, &x, &[64]).unwrap();
        for (u, x) in s.values[0].iter().zip(&x) {
            assert!((u - d.u0.value(x - drv[64])).abs() < 1e-14);
        }
    }

    #[test]
    fn unit_drift_shifts_the_datum() {
        let g = TimeGrid::new(1.0, 256).unwrap();
        let d = InitialDatum::gaussian(0.0, 0.5);
        let x = [-0.5, 0.3, 1.2];
        let s = solve_transport(&d, &DriftSpec::Constant { c: 1.0 }, &g, &[0.0; 257], &x, &[256]).unwrap();
        for (u, x) in s.values[0].iter().zip(&x) {
            assert!((u - d.u0.value(x - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn beyond_horizon_is_extrapolation() {
        let g = TimeGrid::new(1.0, 8).unwrap();
        let d = InitialDatum::gaussian(0.0, 0.5);
        let r = solve_transport(&d, &DriftSpec::Zero, &g, &[0.0; 9], &[0.0], &[9]);
        assert!(matches!(r, Err(Error::Extrapolation(_))));
    }

    #[test]
    fn residual_vanishes_without_motion() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let d = InitialDatum::gaussian(0.0, 0.5);
        let r = weak_residual(&d, &DriftSpec::Zero, &g, &[0.0; 65], 0.3, &SmoothFn::bump(0.0, 1.0), DOMAIN).unwrap();
        assert!(r.residual <= 1e-8, "{r:?}");
    }

    #[test]
    fn constants_solve_the_weak_equation() {
        let g = TimeGrid::new(1.0, 64).unwrap();
        let d = InitialDatum::constant(2.0);
        let r = weak_residual(&d, &DriftSpec::Cos { amp: 1.0 }, &g, &smooth_driver(&g), 0.3, &SmoothFn::bump(0.2, 1.0), DOMAIN)
            .unwrap();
        assert!(r.residual <= 1e-10);
    }

    #[test]
    fn escaping_test_function_is_rejected() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let d = InitialDatum::gaussian(0.0, 0.5);
        let r = weak_residual(&d, &DriftSpec::Zero, &g, &[0.0; 17], 0.3, &SmoothFn::bump(2.5, 1.0), DOMAIN);
        assert!(matches!(r, Err(Error::Input(_))));
        let r = weak_residual(&d, &DriftSpec::Zero, &g, &[0.0; 17], 0.3, &SmoothFn::Sin, DOMAIN);
        assert!(matches!(r, Err(Error::Input(_))));
    }

    #[test]
    fn smooth_driver_residual_converges() {
        let d = InitialDatum::gaussian(0.0, 0.5);
        let eta = SmoothFn::bump(0.3, 1.0);
        let res: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| {
                let g = TimeGrid::new(1.0, n).unwrap();
                weak_residual(&d, &DriftSpec::Zero, &g, &smooth_driver(&g), 0.3, &eta, DOMAIN).unwrap().residual
            })
            .collect();
        assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
    }

    #[test]
    fn piecewise_linear_hits_the_coarse_points() {
        let p = vec![0.0, 1.0, 4.0, 9.0, 16.0];
        assert_eq!(piecewise_linear(&p, 2), vec![0.0, 2.0, 4.0, 10.0, 16.0]);
        assert_eq!(subsample(&p, 2), vec![0.0, 4.0, 16.0]);
    }
}
