//! The local-time functional `Λ^b`, its Fourier truncation, integration by parts,
//! support and moment diagnostics, and a kernel occupation-density estimator.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{param, Error, Result};
use crate::fbm::{FbmConfig, FbmSampler, Sampler};
use crate::flow::Drift;
use crate::grid::TimeGrid;
use crate::quad::{gauss_legendre, simpson, trapezoid_weights};
use crate::stats::Estimate;

/// `B*_t = max_{s <= t} |B_s|`.
pub fn running_max(path: &[f64]) -> Vec<f64> {
    let mut m = 0.0f64;
    path.iter()
        .map(|v| {
            m = m.max(v.abs());
            m
        })
        .collect()
}

/// `∫_{-K}^{K} iu e^{-iuz} du = 2 (sin(Kz)/z^2 - K cos(Kz)/z)`, which is real.
pub fn kernel(z: f64, k: f64) -> f64 {
    let kz = k * z;
    if kz.abs() < 0.5 {
        series_kernel(z, k)
    } else {
        let (s, c) = kz.sin_cos();
        2.0 * (s / (z * z) - k * c / z)
    }
}

fn series_kernel(z: f64, k: f64) -> f64 {
    // 2 K^3 z Σ_m (-1)^m (Kz)^{2m} / ((2m+1)! (2m+3))
    let x2 = (k * z).powi(2);
    let mut term = 1.0;
    let mut acc = 0.0;
    for m in 0..10 {
        acc += term / (2 * m + 3) as f64;
        term *= -x2 / (((2 * m + 2) * (2 * m + 3)) as f64);
    }
    2.0 * k.powi(3) * z * acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    /// Closed-form `u`-integral.
    Analytic,
    /// Composite Gauss–Legendre in `u` with `±u` pairing.
    Tensor,
}

/// `Λ̂^b_K(t, y)` on a `y`-grid for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaField {
    pub y: Vec<f64>,
    pub values: Vec<f64>,
    pub k: f64,
    pub t_index: usize,
    pub imag_residue: f64,
    pub route: Route,
}

/// Largest imaginary part tolerated by the tensor route.
pub const IMAG_TOLERANCE: f64 = 1e-8;

fn check_inputs(grid: &TimeGrid, path: &[f64], t_index: usize, k: f64) -> Result<()> {
    if !(k > 0.0) {
        return param(format!("truncation K must be positive, got {k}"));
    }
    if path.len() != grid.len() || t_index > grid.steps() {
        return param("path or time index does not match the grid");
    }
    Ok(())
}

fn uniform_step(y: &[f64]) -> Option<f64> {
    if y.len() < 2 {
        return None;
    }
    let h = (y[y.len() - 1] - y[0]) / (y.len() - 1) as f64;
    let ok = y.iter().enumerate().all(|(j, v)| (v - (y[0] + j as f64 * h)).abs() <= 1e-9 * h.abs().max(1e-300));
    ok.then_some(h)
}

/// Values `b(s_i, y_j)` row by row in `s`, shared when `b` is autonomous.
fn drift_table(b: &dyn Drift, grid: &TimeGrid, n_s: usize, y: &[f64]) -> Vec<Vec<f64>> {
    if b.is_autonomous() {
        vec![y.iter().map(|&v| b.eval(0.0, v)).collect()]
    } else {
        (0..n_s).map(|i| y.iter().map(|&v| b.eval(grid.time(i), v)).collect()).collect()
    }
}

/// `Λ̂^b_K(t, y) = (2π)^{-1} ∫_{-K}^{K} ∫_0^t b(s, y) iu e^{-iu(B_s - y)} ds du` with the
/// `u`-integral in closed form and the trapezoid rule in `s`.
pub fn lambda_truncated(
    b: &dyn Drift,
    grid: &TimeGrid,
    path: &[f64],
    t_index: usize,
    y: &[f64],
    k: f64,
) -> Result<LambdaField> {
    check_inputs(grid, path, t_index, k)?;
    let ws = trapezoid_weights(t_index + 1, grid.dt());
    let table = drift_table(b, grid, t_index + 1, y);
    let mut values = vec![0.0; y.len()];
    let step = uniform_step(y);
    for (i, &w) in ws.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let brow = &table[if table.len() == 1 { 0 } else { i }];
        let bi = path[i];
        match step {
            Some(h) => accumulate_uniform(&mut values, brow, w, bi, y[0], h, k),
            None => {
                for ((v, &yj), &bj) in values.iter_mut().zip(y).zip(brow) {
                    if bj != 0.0 {
                        *v += w * bj * kernel(bi - yj, k);
                    }
                }
            }
        }
    }
    values.iter_mut().for_each(|v| *v /= 2.0 * PI);
    Ok(LambdaField { y: y.to_vec(), values, k, t_index, imag_residue: 0.0, route: Route::Analytic })
}

/// Adds `w b_j kernel(bi - y0 - j h)` using a rotation recurrence for `sin/cos(K z_j)`.
fn accumulate_uniform(values: &mut [f64], brow: &[f64], w: f64, bi: f64, y0: f64, h: f64, k: f64) {
    const RESYNC: usize = 64;
    let (sd, cd) = (-k * h).sin_cos();
    let (mut s, mut c) = (0.0, 0.0);
    for (j, (v, &bj)) in values.iter_mut().zip(brow).enumerate() {
        let z = bi - y0 - j as f64 * h;
        if j % RESYNC == 0 {
            let sc = (k * z).sin_cos();
            s = sc.0;
            c = sc.1;
        } else {
            let ns = s * cd + c * sd;
            let nc = c * cd - s * sd;
            s = ns;
            c = nc;
        }
        if bj == 0.0 {
            continue;
        }
        let kz = k * z;
        let kern = if kz.abs() < 0.5 { series_kernel(z, k) } else { 2.0 * (s / (z * z) - k * c / z) };
        *v += w * bj * kern;
    }
}

/// Tensor quadrature in `(s, u)`: composite Gauss–Legendre on `[0, K]` with `nodes_per_unit`
/// nodes per unit length, evaluated at `+u` and `-u` separately.
pub fn lambda_tensor(
    b: &dyn Drift,
    grid: &TimeGrid,
    path: &[f64],
    t_index: usize,
    y: &[f64],
    k: f64,
    nodes_per_unit: usize,
) -> Result<LambdaField> {
    check_inputs(grid, path, t_index, k)?;
    let panels = k.ceil() as usize;
    let width = k / panels as f64;
    let (gx, gw) = gauss_legendre(nodes_per_unit.max(1));
    let mut us = Vec::new();
    let mut uw = Vec::new();
    for p in 0..panels {
        let a = p as f64 * width;
        for (x, w) in gx.iter().zip(&gw) {
            us.push(a + 0.5 * width * (x + 1.0));
            uw.push(0.5 * width * w);
        }
    }
    let ws = trapezoid_weights(t_index + 1, grid.dt());
    let table = drift_table(b, grid, t_index + 1, y);
    let mut re = vec![0.0; y.len()];
    let mut im = vec![0.0; y.len()];
    for (i, &w) in ws.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let brow = &table[if table.len() == 1 { 0 } else { i }];
        for j in 0..y.len() {
            let bj = brow[j];
            if bj == 0.0 {
                continue;
            }
            let z = path[i] - y[j];
            let (mut sr, mut si) = (0.0, 0.0);
            for (&u, &wu) in us.iter().zip(&uw) {
                for sign in [1.0, -1.0] {
                    let su = sign * u;
                    // iu e^{-iuz} = u sin(uz) + i u cos(uz)
                    let (s, c) = (su * z).sin_cos();
                    sr += wu * su * s;
                    si += wu * su * c;
                }
            }
            re[j] += w * bj * sr;
            im[j] += w * bj * si;
        }
    }
    let imag_residue = im.iter().fold(0.0f64, |m, v| m.max(v.abs())) / (2.0 * PI);
    if imag_residue > IMAG_TOLERANCE {
        return Err(Error::Resolution(format!("imaginary residue {imag_residue:e}")));
    }
    Ok(LambdaField {
        y: y.to_vec(),
        values: re.iter().map(|v| v / (2.0 * PI)).collect(),
        k,
        t_index,
        imag_residue,
        route: Route::Tensor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpSample {
    /// `∫_0^t b'(s, B_s) ds`.
    pub lhs: f64,
    /// `-∫ Λ̂^b_K(t, y) dy`.
    pub rhs: f64,
}

/// Both sides of the integration-by-parts identity for one path; `y` carries Simpson nodes.
pub fn ibp_path(
    b: &dyn Drift,
    grid: &TimeGrid,
    path: &[f64],
    t_index: usize,
    y: &(Vec<f64>, Vec<f64>),
    k: f64,
) -> Result<IbpSample> {
    let (ys, wy) = y;
    for i in (0..=t_index).step_by((t_index / 16).max(1)) {
        let t = grid.time(i);
        if b.eval(t, ys[0]) != 0.0 || b.eval(t, ys[ys.len() - 1]) != 0.0 {
            return Err(Error::Input("drift does not vanish at the edges of the y-grid".into()));
        }
    }
    let ws = trapezoid_weights(t_index + 1, grid.dt());
    let mut lhs = 0.0;
    for (i, w) in ws.iter().enumerate() {
        lhs += w * b.deriv(grid.time(i), path[i]).ok_or(Error::Capability("a spatial derivative"))?;
    }
    let field = lambda_truncated(b, grid, path, t_index, ys, k)?;
    let rhs = -field.values.iter().zip(wy).map(|(v, w)| v * w).sum::<f64>();
    Ok(IbpSample { lhs, rhs })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IbpReport {
    pub samples: Vec<IbpSample>,
    /// `mean |lhs - rhs| / mean |lhs|`.
    pub mean_relative_gap: f64,
}

impl IbpReport {
    pub fn from_samples(samples: Vec<IbpSample>) -> Self {
        let n = samples.len() as f64;
        let gap = samples.iter().map(|s| (s.lhs - s.rhs).abs()).sum::<f64>() / n;
        let size = samples.iter().map(|s| s.lhs.abs()).sum::<f64>() / n;
        Self { samples, mean_relative_gap: gap / size }
    }
}

/// Integration-by-parts check over `n_paths` fBm samples at the horizon.
#[allow(clippy::too_many_arguments)]
pub fn ibp_check(
    b: &dyn Drift,
    hurst: f64,
    grid: &TimeGrid,
    n_paths: usize,
    k: f64,
    y_range: (f64, f64),
    y_nodes: usize,
    seed: u64,
) -> Result<IbpReport> {
    let sampler = FbmSampler::new(FbmConfig::new(hurst, *grid, seed, Sampler::Circulant)?)?;
    let y = simpson(y_range.0, y_range.1, y_nodes);
    let samples = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| ibp_path(b, grid, &sampler.sample(id).values, grid.steps(), &y, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(IbpReport::from_samples(samples))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub outside_nodes: usize,
    pub flagged: usize,
    pub noise_floor: f64,
    pub fraction: f64,
}

/// Counts `y`-nodes with `|y| > B*_t` where `|Λ̂^b|` exceeds `factor` times the `b = 0` level.
pub fn support_check(
    b: &dyn Drift,
    grid: &TimeGrid,
    paths: &[Vec<f64>],
    t_index: usize,
    y: &[f64],
    k: f64,
    factor: f64,
) -> Result<SupportReport> {
    let zero = crate::flow::DriftSpec::Zero;
    let fields = paths
        .par_iter()
        .map(|p| {
            let f = lambda_truncated(b, grid, p, t_index, y, k)?;
            let z = lambda_truncated(&zero, grid, p, t_index, y, k)?;
            Ok((f, z))
        })
        .collect::<Result<Vec<_>>>()?;
    let noise_floor = fields.iter().flat_map(|(_, z)| z.values.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = factor * noise_floor;
    let mut outside = 0;
    let mut flagged = 0;
    for (p, (f, _)) in paths.iter().zip(&fields) {
        let bstar = running_max(&p[..=t_index])[t_index];
        for (yj, v) in f.y.iter().zip(&f.values) {
            if yj.abs() > bstar {
                outside += 1;
                if v.abs() > threshold {
                    flagged += 1;
                }
            }
        }
    }
    let fraction = if outside == 0 { 0.0 } else { flagged as f64 / outside as f64 };
    Ok(SupportReport { outside_nodes: outside, flagged, noise_floor, fraction })
}

/// `∫ Λ̂^b_K(t, y) φ(y) dy` on Simpson nodes.
pub fn tested_lambda(field: &LambdaField, weights: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    field.values.iter().zip(&field.y).zip(weights).map(|((v, &y), w)| v * phi(y) * w).sum()
}

/// Kernel-smoothed local time `L̂(t, y) = ∫_0^t G_h(y - B_s) ds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationDensity {
    pub y: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
}

impl OccupationDensity {
    /// Gaussian kernel with bandwidth `N^{-1/5}` times the path range.
    pub fn estimate(grid: &TimeGrid, path: &[f64], t_index: usize, y: &[f64]) -> Self {
        let seg = &path[..=t_index];
        let lo = seg.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = seg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let h = (grid.steps() as f64).powf(-0.2) * (hi - lo);
        Self::with_bandwidth(grid, path, t_index, y, h)
    }

    pub fn with_bandwidth(grid: &TimeGrid, path: &[f64], t_index: usize, y: &[f64], h: f64) -> Self {
        let ws = trapezoid_weights(t_index + 1, grid.dt());
        let norm = 1.0 / (h * (2.0 * PI).sqrt());
        let values = y
            .iter()
            .map(|&yj| {
                ws.iter().zip(path).map(|(w, b)| w * (-0.5 * ((yj - b) / h).powi(2)).exp()).sum::<f64>() * norm
            })
            .collect();
        Self { y: y.to_vec(), values, bandwidth: h }
    }

    /// Centered differences in `y` (one-sided at the ends).
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.y.len();
        (0..n)
            .map(|j| {
                let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
                (self.values[b] - self.values[a]) / (self.y[b] - self.y[a])
            })
            .collect()
    }
}

/// Discrete convolution with a unit-mass Gaussian of width `h` on a uniform grid.
pub fn gaussian_smooth(values: &[f64], dy: f64, h: f64) -> Vec<f64> {
    let half = (6.0 * h / dy).ceil() as isize;
    let kern: Vec<f64> = (-half..=half)
        .map(|d| (-0.5 * (d as f64 * dy / h).powi(2)).exp() * dy / (h * (2.0 * PI).sqrt()))
        .collect();
    let n = values.len() as isize;
    (0..n)
        .map(|j| {
            kern.iter()
                .enumerate()
                .filter_map(|(q, w)| {
                    let idx = j + q as isize - half;
                    (0..n).contains(&idx).then(|| w * values[idx as usize])
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub m: u32,
    pub pointwise: Estimate,
    pub integral: Estimate,
    /// `(E|Λ̂|^m Γ(m(1-3H)+1) / (||b||^m m!))^{1/m}`.
    pub fitted_c: f64,
}

/// Empirical moments of `Λ̂^b(t, y0)` and of `∫ |Λ̂^b(t, y)| dy`.
#[allow(clippy::too_many_arguments)]
pub fn moment_experiment(
    b: &dyn Drift,
    hurst: f64,
    grid: &TimeGrid,
    y0: f64,
    y_range: (f64, f64),
    y_nodes: usize,
    ms: &[u32],
    n_paths: usize,
    k: f64,
    seed: u64,
) -> Result<Vec<MomentRow>> {
    if ms.iter().any(|&m| m == 0 || m % 2 == 1 || m > 6) {
        return param("moment orders must be even and at most 6");
    }
    let sampler = FbmSampler::new(FbmConfig::new(hurst, *grid, seed, Sampler::Circulant)?)?;
    let (ys, wy) = simpson(y_range.0, y_range.1, y_nodes);
    let t = grid.steps();
    let draws = (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let path = sampler.sample(id).values;
            let point = lambda_truncated(b, grid, &path, t, &[y0], k)?.values[0];
            let field = lambda_truncated(b, grid, &path, t, &ys, k)?;
            let total: f64 = field.values.iter().zip(&wy).map(|(v, w)| v.abs() * w).sum();
            Ok((point, total))
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = b.sup_norm();
    Ok(ms
        .iter()
        .map(|&m| {
            let pw: Vec<f64> = draws.iter().map(|d| d.0.abs().powi(m as i32)).collect();
            let it: Vec<f64> = draws.iter().map(|d| d.1.powi(m as i32)).collect();
            let pointwise = Estimate::from_samples(&pw);
            let mf = m as f64;
            let fact = gamma(mf + 1.0);
            let fitted_c = (pointwise.mean * gamma(mf * (1.0 - 3.0 * hurst) + 1.0) / (sup.powf(mf) * fact)).powf(1.0 / mf);
            MomentRow { m, pointwise, integral: Estimate::from_samples(&it), fitted_c }
        })
        .collect())
}
