//! Scalar rough paths, two-parameter germs and the sewing map on a grid.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Result};
use crate::grid::{holder_sup, TimeGrid, Triangular};

/// Highest supported truncation level.
pub const MAX_LEVEL: usize = 6;

/// `p = floor(1/gamma)`, guarded against rounding of reciprocals like `1/(1/3)`.
pub fn level_for(gamma: f64) -> usize {
    (1.0 / gamma + 1e-9).floor() as usize
}

/// A rough path `(X^(1), .., X^(p))` stored on grid pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RoughPath {
    grid: TimeGrid,
    gamma: f64,
    path: Vec<f64>,
    levels: Vec<Triangular>,
}

impl RoughPath {
    /// Assembles a rough path from explicit levels `X^(1..=p)`.
    pub fn from_levels(grid: TimeGrid, gamma: f64, path: Vec<f64>, levels: Vec<Triangular>) -> Result<Self> {
        check_gamma(gamma)?;
        let p = level_for(gamma);
        if levels.len() != p {
            return dim(format!("expected {p} levels for gamma = {gamma}, got {}", levels.len()));
        }
        if path.len() != grid.len() || levels.iter().any(|l| l.points() != grid.len()) {
            return dim("levels do not match the grid");
        }
        Ok(Self { grid, gamma, path, levels })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn p(&self) -> usize {
        self.levels.len()
    }

    /// Underlying path values `X_{t_i}`.
    pub fn path(&self) -> &[f64] {
        &self.path
    }

    /// Level `n >= 1`.
    pub fn level(&self, n: usize) -> &Triangular {
        &self.levels[n - 1]
    }

    pub fn level_mut(&mut self, n: usize) -> &mut Triangular {
        &mut self.levels[n - 1]
    }

    /// `X^(n)_{ij}` with `X^(0) = 1`.
    #[inline]
    pub fn get(&self, n: usize, i: usize, j: usize) -> f64 {
        if n == 0 {
            1.0
        } else {
            self.levels[n - 1].get(i, j)
        }
    }

    /// The element of the tensor algebra over the pair `(i, j)`.
    pub fn tensor(&self, i: usize, j: usize) -> crate::tensor::TruncTensor {
        let levels = (0..=self.p()).map(|n| self.get(n, i, j)).collect();
        crate::tensor::TruncTensor::new(levels).expect("level 0 is one")
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma <= 0.5) {
        return param(format!("gamma must lie in (0, 1/2], got {gamma}"));
    }
    let p = level_for(gamma);
    if p > MAX_LEVEL {
        return param(format!("level p = {p} exceeds the supported maximum {MAX_LEVEL}"));
    }
    Ok(())
}

/// Geometric lift `X^(n)_{st} = (X_{st})^n / n!` with `p = floor(1/gamma)`.
pub fn geometric_lift(grid: &TimeGrid, path: &[f64], gamma: f64) -> Result<RoughPath> {
    if !(gamma > 0.0) || level_for(gamma) < 2 {
        return param(format!("geometric lift needs p = floor(1/gamma) >= 2, got gamma = {gamma}"));
    }
    check_gamma(gamma)?;
    if path.len() != grid.len() {
        return dim(format!("path has {} samples, grid has {}", path.len(), grid.len()));
    }
    let p = level_for(gamma);
    let first = Triangular::increments(path);
    let mut levels = vec![first.clone()];
    for n in 2..=p {
        let prev = levels.last().unwrap();
        levels.push(prev.zip_map(&first, |a, x| a * x / n as f64));
    }
    Ok(RoughPath { grid: *grid, gamma, path: path.to_vec(), levels })
}

/// Largest violation of Chen's relation over all grid triples and levels.
pub fn chen_defect(x: &RoughPath) -> f64 {
    match x.p() {
        1 => chen_defect_p::<1>(x),
        2 => chen_defect_p::<2>(x),
        3 => chen_defect_p::<3>(x),
        4 => chen_defect_p::<4>(x),
        5 => chen_defect_p::<5>(x),
        _ => chen_defect_p::<MAX_LEVEL>(x),
    }
}

fn chen_defect_p<const P: usize>(x: &RoughPath) -> f64 {
    const L: usize = 8;
    let npts = x.grid.len();
    if x.levels.iter().any(|lv| lv.as_slice().iter().any(|v| !v.is_finite())) {
        return f64::INFINITY;
    }
    (0..npts)
        .into_par_iter()
        .map(|i| {
            let mut worst = [0.0f64; L];
            let mut s = [0.0; P];
            let mut a: [&[f64]; P] = [&[]; P];
            let mut b: [&[f64]; P] = [&[]; P];
            for k in i + 1..npts {
                let off = k - i;
                let len = npts - 1 - k;
                for n in 0..P {
                    s[n] = x.levels[n].get(i, k);
                    // X^(n+1)_{ij} and X^(n+1)_{kj} for j > k
                    a[n] = &x.levels[n].row(i)[off..off + len];
                    b[n] = &x.levels[n].row(k)[..len];
                }
                let full = len / L * L;
                let mut c = 0;
                while c < full {
                    let mut bl = [[0.0f64; L]; P];
                    for n in 0..P {
                        bl[n] = b[n][c..c + L].try_into().unwrap();
                    }
                    for n in 0..P {
                        let mut d: [f64; L] = a[n][c..c + L].try_into().unwrap();
                        for q in 0..L {
                            d[q] -= s[n] + bl[n][q];
                        }
                        for l in 0..n {
                            let sc = s[n - 1 - l];
                            for q in 0..L {
                                d[q] -= sc * bl[l][q];
                            }
                        }
                        for q in 0..L {
                            let v = d[q].abs();
                            worst[q] = if v > worst[q] { v } else { worst[q] };
                        }
                    }
                    c += L;
                }
                for j in full..len {
                    for n in 0..P {
                        let mut d = a[n][j] - s[n] - b[n][j];
                        for l in 0..n {
                            d -= s[n - 1 - l] * b[l][j];
                        }
                        worst[0] = worst[0].max(d.abs());
                    }
                }
            }
            worst.iter().cloned().fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `max |f_{ij}| / (t_j - t_i)^gamma` for a two-parameter function on the grid.
pub fn holder_norm(values: &Triangular, grid: &TimeGrid, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return param(format!("Hölder exponent must lie in (0, 1], got {gamma}"));
    }
    Ok(holder_sup(values, grid, gamma))
}

/// Hölder seminorm of a sampled path, computed from its increments without storing them.
pub fn path_holder(path: &[f64], grid: &TimeGrid, gamma: f64) -> f64 {
    let dt = grid.dt();
    let w: Vec<f64> = (0..path.len()).map(|d| if d == 0 { 0.0 } else { (d as f64 * dt).powf(-gamma) }).collect();
    let mut best = 0.0f64;
    for i in 0..path.len() {
        let xi = path[i];
        for (d, &xj) in path[i + 1..].iter().enumerate() {
            best = best.max((xj - xi).abs() * w[d + 1]);
        }
    }
    best
}

/// Inhomogeneous distance `Σ_n ||X^(n) - Y^(n)||_{nγ}`.
pub fn rough_distance(x: &RoughPath, y: &RoughPath) -> Result<f64> {
    if x.grid != y.grid || x.p() != y.p() || x.gamma != y.gamma {
        return dim("rough paths live on different grids or levels");
    }
    Ok((1..=x.p())
        .map(|n| {
            let d = x.level(n).zip_map(y.level(n), |a, b| a - b);
            holder_sup(&d, &x.grid, n as f64 * x.gamma)
        })
        .sum())
}

/// A two-parameter function `Ξ_{st}` on grid pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParamFn {
    pub grid: TimeGrid,
    pub values: Triangular,
    pub alpha: f64,
    pub beta: f64,
}

impl TwoParamFn {
    pub fn new(grid: TimeGrid, values: Triangular, alpha: f64, beta: f64) -> Result<Self> {
        if values.points() != grid.len() {
            return dim("values do not match the grid");
        }
        Ok(Self { grid, values, alpha, beta })
    }

    pub fn from_fn(grid: &TimeGrid, alpha: f64, beta: f64, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self { grid: *grid, values: Triangular::from_fn(grid.len(), f), alpha, beta }
    }

    /// `δΞ_{sut} = Ξ_{st} - Ξ_{su} - Ξ_{ut}` for grid indices `s < u < t`.
    pub fn delta(&self, s: usize, u: usize, t: usize) -> f64 {
        self.values.get(s, t) - self.values.get(s, u) - self.values.get(u, t)
    }

    pub fn alpha_norm(&self) -> f64 {
        holder_sup(&self.values, &self.grid, self.alpha)
    }

    /// `sup |δΞ_{sut}| / (t-s)^β` over triples whose indices are multiples of `stride`.
    pub fn delta_norm(&self, stride: usize) -> f64 {
        let stride = stride.max(1);
        let dt = self.grid.dt();
        let idx: Vec<usize> = (0..self.grid.len()).step_by(stride).collect();
        let mut best = 0.0f64;
        for (a, &s) in idx.iter().enumerate() {
            for (b, &u) in idx.iter().enumerate().skip(a + 1) {
                for &t in &idx[b + 1..] {
                    let w = ((t - s) as f64 * dt).powf(-self.beta);
                    best = best.max(self.delta(s, u, t).abs() * w);
                }
            }
        }
        best
    }

    pub fn linear_combination(a: f64, x: &Self, b: f64, y: &Self) -> Result<Self> {
        if x.grid != y.grid {
            return dim("germs live on different grids");
        }
        Ok(Self {
            grid: x.grid,
            values: x.values.zip_map(&y.values, |p, q| a * p + b * q),
            alpha: x.alpha.min(y.alpha),
            beta: x.beta.min(y.beta),
        })
    }
}

/// Output of the sewing map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sewn {
    /// `(𝓘Ξ)_{t_i}` with value 0 at the origin.
    pub path: Vec<f64>,
    /// Measured `max |(𝓘Ξ)_{st} - Ξ_{st}| / (t-s)^β`.
    pub constant: f64,
}

/// Sewing map on a finite grid: the compensated Riemann sums telescope to the finest mesh.
pub fn sewing_integrate(xi: &TwoParamFn) -> Result<Sewn> {
    if xi.beta <= 1.0 {
        return param(format!("sewing needs beta > 1, got {}", xi.beta));
    }
    if !(xi.alpha > 0.0 && xi.alpha <= 1.0) {
        return param(format!("alpha must lie in (0, 1], got {}", xi.alpha));
    }
    let npts = xi.grid.len();
    let mut path = vec![0.0; npts];
    for i in 0..npts - 1 {
        path[i + 1] = path[i] + xi.values.get(i, i + 1);
    }
    let dt = xi.grid.dt();
    let w: Vec<f64> = (0..npts).map(|d| if d == 0 { 0.0 } else { (d as f64 * dt).powf(-xi.beta) }).collect();
    let constant = (0..npts)
        .into_par_iter()
        .map(|i| {
            xi.values
                .row(i)
                .iter()
                .enumerate()
                .map(|(d, &v)| (path[i + d + 1] - path[i] - v).abs() * w[d + 1])
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(Sewn { path, constant })
}

/// `max_{|t-s| = h} |(𝓘Ξ)_{st} - Ξ_{st}|` for each lag `h = lag * dt`.
pub fn remainder_profile(xi: &TwoParamFn, sewn: &Sewn, lags: &[usize]) -> Vec<(f64, f64)> {
    let npts = xi.grid.len();
    lags.iter()
        .filter(|&&l| l >= 1 && l < npts)
        .map(|&l| {
            let worst = (0..npts - l)
                .map(|i| (sewn.path[i + l] - sewn.path[i] - xi.values.get(i, i + l)).abs())
                .fold(0.0, f64::max);
            (l as f64 * xi.grid.dt(), worst)
        })
        .collect()
}

/// Dyadic lags `2^k` with `lo <= 2^k <= hi`.
pub fn dyadic_lags(lo: usize, hi: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut l = 1;
    while l <= hi {
        if l >= lo {
            out.push(l);
        }
        l *= 2;
    }
    out
}
