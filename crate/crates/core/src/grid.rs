//! Uniform time grids and triangular storage for functions on grid pairs `i < j`.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// Uniform grid `t_i = i T / N`, `i = 0..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return param(format!("time grid needs at least 2 steps, got {steps}"));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return param(format!("time horizon must be positive and finite, got {horizon}"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Number of steps `N`.
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            i as f64 * self.horizon / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Grid with `steps / factor` steps over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return param(format!("cannot coarsen {} steps by {factor}", self.steps));
        }
        Self::new(self.horizon, self.steps / factor)
    }

    /// Index of the grid point closest to `t`.
    pub fn nearest_index(&self, t: f64) -> usize {
        let i = (t / self.dt()).round();
        (i.max(0.0) as usize).min(self.steps)
    }
}

/// Values on the pairs `i < j` of `n` points, stored row by row.
///
/// Row `i` holds `j = i+1 .. n` contiguously so that inner loops over the
/// right endpoint run over a slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Triangular {
    points: usize,
    data: Vec<f64>,
}

impl Triangular {
    pub fn zeros(points: usize) -> Self {
        let len = points * points.saturating_sub(1) / 2;
        Self { points, data: vec![0.0; len] }
    }

    pub fn from_fn(points: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(points);
        for i in 0..points {
            let start = out.row_start(i);
            for j in i + 1..points {
                out.data[start + j - i - 1] = f(i, j);
            }
        }
        out
    }

    /// Increments `x_j - x_i` of a sampled path.
    pub fn increments(path: &[f64]) -> Self {
        Self::from_fn(path.len(), |i, j| path[j] - path[i])
    }

    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    fn row_start(&self, i: usize) -> usize {
        i * (self.points - 1) - i * i.saturating_sub(1) / 2
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < j && j < self.points);
        self.data[self.row_start(i) + j - i - 1]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < j && j < self.points);
        let k = self.row_start(i) + j - i - 1;
        self.data[k] = v;
    }

    /// Entries `(i, j)` for `j = i+1 .. points`.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let s = self.row_start(i);
        &self.data[s..s + self.points - 1 - i]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let s = self.row_start(i);
        let len = self.points - 1 - i;
        &mut self.data[s..s + len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn zip_map(&self, other: &Triangular, f: impl Fn(f64, f64) -> f64) -> Triangular {
        assert_eq!(self.points, other.points);
        Triangular {
            points: self.points,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Triangular {
        Triangular { points: self.points, data: self.data.iter().map(|&a| f(a)).collect() }
    }

    /// Iterate `(i, j, value)` in row order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.points).flat_map(move |i| {
            self.row(i).iter().enumerate().map(move |(k, &v)| (i, i + 1 + k, v))
        })
    }
}

/// `max |f_ij| / (t_j - t_i)^gamma` over all grid pairs.
pub fn holder_sup(values: &Triangular, grid: &TimeGrid, gamma: f64) -> f64 {
    let dt = grid.dt();
    // (t_j - t_i)^-gamma depends only on j - i
    let weights: Vec<f64> = (0..values.points())
        .map(|d| if d == 0 { 0.0 } else { (d as f64 * dt).powf(-gamma) })
        .collect();
    let mut best = 0.0f64;
    for i in 0..values.points() {
        for (k, &v) in values.row(i).iter().enumerate() {
            best = best.max(v.abs() * weights[k + 1]);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_are_exact() {
        let g = TimeGrid::new(std::f64::consts::PI, 7).unwrap();
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(7), std::f64::consts::PI);
        assert!(g.times().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn grid_rejects_degenerate_input() {
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 4).is_err());
        assert!(TimeGrid::new(f64::NAN, 4).is_err());
    }

    #[test]
    fn triangular_layout_roundtrip() {
        let t = Triangular::from_fn(6, |i, j| (10 * i + j) as f64);
        for (i, j, v) in t.iter() {
            assert_eq!(v, (10 * i + j) as f64);
            assert_eq!(t.get(i, j), v);
        }
        assert_eq!(t.iter().count(), 15);
        assert_eq!(t.row(4), &[45.0]);
    }

    #[test]
    fn holder_of_linear_and_quadratic() {
        let g = TimeGrid::new(1.0, 16).unwrap();
        let times = g.times();
        let lin = Triangular::from_fn(g.len(), |i, j| times[j] - times[i]);
        assert!((holder_sup(&lin, &g, 1.0) - 1.0).abs() < 1e-12);
        let quad = Triangular::from_fn(g.len(), |i, j| (times[j] - times[i]).powi(2));
        assert!((holder_sup(&quad, &g, 1.0) - 1.0).abs() < 1e-12);
        assert_eq!(holder_sup(&Triangular::zeros(g.len()), &g, 0.3), 0.0);
    }
}
