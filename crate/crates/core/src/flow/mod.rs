//! Flows of `dφ = b(t, φ) dt + dX` with additive rough noise, inverse flows,
//! flow derivatives and the mollification experiments.

mod drift;
pub mod experiments;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use drift::*;

use crate::error::{param, Error, Result};
use crate::grid::TimeGrid;

/// One solved trajectory: `φ_{t_i}` and the cumulative drift `∫_0^{t_i} b(r, φ_r) dr`.
#[derive(Debug, Clone, Copy)]
pub struct Trajectory<'a> {
    pub phi: &'a [f64],
    pub drift: &'a [f64],
}

impl Trajectory<'_> {
    /// `R^φ_{st} = ∫_s^t b(r, φ_r) dr`.
    pub fn remainder(&self, s: usize, t: usize) -> f64 {
        self.drift[t] - self.drift[s]
    }
}

/// `φ_t(x)` on the time grid for a set of initial points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    pub grid: TimeGrid,
    pub nodes: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub drift: Vec<Vec<f64>>,
    pub driver: Vec<f64>,
}

impl FlowField {
    pub fn trajectory(&self, node: usize) -> Trajectory<'_> {
        Trajectory { phi: &self.phi[node], drift: &self.drift[node] }
    }

    /// `φ_{t_i}(x_j)` for all nodes.
    pub fn at(&self, i: usize) -> Vec<f64> {
        self.phi.iter().map(|p| p[i]).collect()
    }

    pub fn final_values(&self) -> Vec<f64> {
        self.at(self.grid.steps())
    }

    /// `max (|R^φ_{st}| - sup|b| (t - s))` over nodes and grid pairs; non-positive when the bound holds.
    pub fn drift_bound_excess(&self, sup: f64) -> f64 {
        let dt = self.grid.dt();
        let mut worst = f64::NEG_INFINITY;
        for d in &self.drift {
            for i in 0..d.len() {
                for (k, &v) in d[i + 1..].iter().enumerate() {
                    worst = worst.max((v - d[i]).abs() - sup * (k + 1) as f64 * dt * (1.0 + 1e-12));
                }
            }
        }
        worst
    }
}

fn checked(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Input("drift evaluation produced a non-finite value".into()))
    }
}

/// Heun stepping of `y' = b(t, y + X_t - X_0)`; `φ = y + X_t - X_0`.
fn heun(drift: &dyn Drift, grid: &TimeGrid, driver: &[f64], x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = grid.steps();
    let dt = grid.dt();
    let mut phi = vec![0.0; n + 1];
    let mut cum = vec![0.0; n + 1];
    let mut y = x;
    phi[0] = x;
    let mut f0 = checked(drift.eval(grid.time(0), x))?;
    for i in 0..n {
        let shift1 = driver[i + 1] - driver[0];
        let pred = y + dt * f0;
        let f1 = checked(drift.eval(grid.time(i + 1), pred + shift1))?;
        let inc = 0.5 * dt * (f0 + f1);
        y += inc;
        cum[i + 1] = cum[i] + inc;
        phi[i + 1] = y + shift1;
        if i + 1 < n {
            f0 = checked(drift.eval(grid.time(i + 1), phi[i + 1]))?;
        }
    }
    Ok((phi, cum))
}

pub fn solve_flow(drift: &dyn Drift, grid: &TimeGrid, driver: &[f64], nodes: &[f64]) -> Result<FlowField> {
    if driver.len() != grid.len() {
        return param(format!("driver has {} samples, grid has {}", driver.len(), grid.len()));
    }
    let solved: Vec<(Vec<f64>, Vec<f64>)> =
        nodes.par_iter().map(|&x| heun(drift, grid, driver, x)).collect::<Result<_>>()?;
    let (phi, cum) = solved.into_iter().unzip();
    Ok(FlowField { grid: *grid, nodes: nodes.to_vec(), phi, drift: cum, driver: driver.to_vec() })
}

/// `ψ^{t0}_t(y)` for `t` in `[0, t0]`, indexed by `r = 0..=t0_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseFlow {
    pub t0: f64,
    pub t0_index: usize,
    pub flow: FlowField,
}

impl InverseFlow {
    /// `ψ^{t0}_{t0}(y)` per node, which inverts `φ_{t0}`.
    pub fn endpoint(&self) -> Vec<f64> {
        self.flow.final_values()
    }
}

/// Reversed driver `r ↦ -(X_{t0} - X_{t0 - r})`.
pub fn reversed_driver(driver: &[f64], t0_index: usize) -> Vec<f64> {
    (0..=t0_index).map(|r| -(driver[t0_index] - driver[t0_index - r])).collect()
}

/// Solves `ψ_t(y) = y - ∫_0^t b(t0 - r, ψ_r) dr - (X_{t0} - X_{t0-t})` with the forward stepper.
pub fn solve_inverse_flow(
    drift: &dyn Drift,
    grid: &TimeGrid,
    driver: &[f64],
    t0_index: usize,
    nodes: &[f64],
) -> Result<InverseFlow> {
    if t0_index > grid.steps() {
        return param(format!("t0 index {t0_index} is beyond the grid"));
    }
    if driver.len() != grid.len() {
        return param("driver does not match the grid");
    }
    let t0 = grid.time(t0_index);
    let sub = TimeGrid::new(t0, t0_index)
        .map_err(|_| Error::Parameter(format!("t0 index {t0_index} leaves fewer than two steps")))?;
    let rev = Reversed { inner: drift, t0 };
    let flow = solve_flow(&rev, &sub, &reversed_driver(driver, t0_index), nodes)?;
    Ok(InverseFlow { t0, t0_index, flow })
}

/// `max_x |ψ^{t0}_{t0}(φ_{t0}(x)) - x|`.
pub fn composition_defect(drift: &dyn Drift, grid: &TimeGrid, driver: &[f64], nodes: &[f64]) -> Result<f64> {
    let fwd = solve_flow(drift, grid, driver, nodes)?;
    let inv = solve_inverse_flow(drift, grid, driver, grid.steps(), &fwd.final_values())?;
    Ok(inv.endpoint().iter().zip(nodes).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// `∂_x φ_t(x) = exp ∫_0^t b'(r, φ_r(x)) dr` by trapezoid quadrature along the trajectory.
pub fn flow_derivative(drift: &dyn Drift, grid: &TimeGrid, driver: &[f64], x: f64) -> Result<Vec<f64>> {
    if drift.deriv(0.0, x).is_none() {
        return Err(Error::Capability("a spatial derivative"));
    }
    let flow = solve_flow(drift, grid, driver, &[x])?;
    let phi = &flow.phi[0];
    let dt = grid.dt();
    let d: Vec<f64> = phi
        .iter()
        .enumerate()
        .map(|(i, &p)| drift.deriv(grid.time(i), p).ok_or(Error::Capability("a spatial derivative")))
        .collect::<Result<_>>()?;
    let mut out = vec![1.0; phi.len()];
    let mut acc = 0.0;
    for i in 0..phi.len() - 1 {
        acc += 0.5 * dt * (d[i] + d[i + 1]);
        out[i + 1] = acc.exp();
    }
    Ok(out)
}

/// Centered difference `(φ_t(x+h) - φ_t(x-h)) / 2h`.
pub fn flow_derivative_fd(drift: &dyn Drift, grid: &TimeGrid, driver: &[f64], x: f64, h: f64) -> Result<Vec<f64>> {
    let f = solve_flow(drift, grid, driver, &[x - h, x + h])?;
    Ok(f.phi[1].iter().zip(&f.phi[0]).map(|(a, b)| (a - b) / (2.0 * h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    fn wiggle(g: &TimeGrid) -> Vec<f64> {
        g.times().iter().map(|t| (7.0 * t).sin() * 0.3 + t * t).collect()
    }

    #[test]
    fn zero_drift_is_exact_in_the_driver() {
        let g = grid(64);
        let x = wiggle(&g);
        let f = solve_flow(&DriftSpec::Zero, &g, &x, &[0.5, -1.0]).unwrap();
        for (k, x0) in [0.5, -1.0].iter().enumerate() {
            for i in 0..=64 {
                assert_eq!(f.phi[k][i], x0 + x[i] - x[0]);
            }
        }
    }

    #[test]
    fn constant_and_linear_drifts() {
        let g = grid(1024);
        let zero = vec![0.0; 1025];
        let f = solve_flow(&DriftSpec::Constant { c: 0.3 }, &g, &zero, &[1.0]).unwrap();
        assert!((f.phi[0][1024] - 1.3).abs() < 1e-10);
        let f = solve_flow(&DriftSpec::Linear { a: -1.0 }, &g, &zero, &[2.0]).unwrap();
        assert!((f.phi[0][1024] - 2.0 * (-1.0f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn nan_drift_is_an_input_error() {
        let g = grid(8);
        let d = FnDrift { f: |_: f64, _: f64| f64::NAN, df: None::<fn(f64, f64) -> f64>, sup: 0.0 };
        assert!(matches!(solve_flow(&d, &g, &[0.0; 9], &[0.0]), Err(Error::Input(_))));
    }

    #[test]
    fn drift_record_respects_the_bound() {
        let g = grid(128);
        let d = DriftSpec::Cos { amp: 1.5 };
        let f = solve_flow(&d, &g, &wiggle(&g), &[0.0, 0.7]).unwrap();
        assert!(f.drift_bound_excess(d.sup_norm()) <= 0.0);
    }

    #[test]
    fn inverse_of_zero_drift_flow() {
        let g = grid(32);
        let x = wiggle(&g);
        let inv = solve_inverse_flow(&DriftSpec::Zero, &g, &x, 32, &[0.25]).unwrap();
        assert!((inv.endpoint()[0] - (0.25 - (x[32] - x[0]))).abs() < 1e-15);
        for t in 0..=32 {
            assert!((inv.flow.phi[0][t] - (0.25 - x[32] + x[32 - t])).abs() < 1e-15);
        }
    }

    #[test]
    fn inverse_flow_composition_is_small() {
        let g = grid(512);
        let x = wiggle(&g);
        let d = composition_defect(&DriftSpec::Cos { amp: 1.0 }, &g, &x, &[-0.5, 0.0, 0.8]).unwrap();
        assert!(d < 1e-5);
    }

    #[test]
    fn flow_derivative_closed_forms() {
        let g = grid(1024);
        let zero = vec![0.0; 1025];
        let d = flow_derivative(&DriftSpec::Linear { a: -1.0 }, &g, &zero, 1.0).unwrap();
        for (i, v) in d.iter().enumerate() {
            assert!((v - (-g.time(i)).exp()).abs() < 1e-6);
        }
        assert!(flow_derivative(&DriftSpec::Zero, &g, &wiggle(&g), 0.3).unwrap().iter().all(|&v| v == 1.0));
        assert!(matches!(
            flow_derivative(&DriftSpec::Sign { amp: 1.0 }, &g, &zero, 0.0),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn flow_derivative_agrees_with_finite_differences() {
        let g = grid(512);
        let x = wiggle(&g);
        let d = DriftSpec::Tanh { amp: 1.0 };
        let a = flow_derivative(&d, &g, &x, 0.2).unwrap();
        let b = flow_derivative_fd(&d, &g, &x, 0.2, 1e-4).unwrap();
        assert!(a.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-3));
    }
}
