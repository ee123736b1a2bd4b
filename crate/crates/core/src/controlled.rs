//! Controlled paths, their seminorms, rough integration and Taylor lifts of `η∘φ`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dim, param, Error, Result};
use crate::flow::{FlowField, Trajectory};
use crate::functions::Smooth;
use crate::grid::{holder_sup, TimeGrid, Triangular};
use crate::rough::{geometric_lift, sewing_integrate, RoughPath, TwoParamFn};

/// `Y = (Y^(0), .., Y^(p-1))` controlled by a rough path, with cached remainders.
#[derive(Debug, Clone)]
pub struct ControlledPath {
    reference: Arc<RoughPath>,
    components: Vec<Vec<f64>>,
    remainders: Vec<Triangular>,
}

impl ControlledPath {
    /// Builds from components `Y^(0..p)`; remainders
    /// `Y^(k)♯_{st} = Y^(k)_t - Σ_{n=k}^{p-1} Y^(n)_s X^(n-k)_{st}` are computed eagerly.
    pub fn new(reference: Arc<RoughPath>, components: Vec<Vec<f64>>) -> Result<Self> {
        let p = reference.p();
        let npts = reference.grid().len();
        if components.len() != p {
            return dim(format!("expected {p} components, got {}", components.len()));
        }
        if components.iter().any(|c| c.len() != npts) {
            return dim("component length does not match the grid");
        }
        let remainders = (0..p)
            .into_par_iter()
            .map(|k| {
                let mut r = Triangular::zeros(npts);
                for i in 0..npts - 1 {
                    let row = r.row_mut(i);
                    for (d, v) in row.iter_mut().enumerate() {
                        *v = components[k][i + 1 + d] - components[k][i];
                    }
                    for n in k + 1..p {
                        let c = components[n][i];
                        if c == 0.0 {
                            continue;
                        }
                        let lvl = reference.level(n - k).row(i);
                        for (v, x) in row.iter_mut().zip(lvl) {
                            *v -= c * x;
                        }
                    }
                }
                r
            })
            .collect();
        Ok(Self { reference, components, remainders })
    }

    /// A plain path with vanishing higher components.
    pub fn plain(reference: Arc<RoughPath>, y: Vec<f64>) -> Result<Self> {
        let npts = y.len();
        let mut comps = vec![y];
        comps.extend((1..reference.p()).map(|_| vec![0.0; npts]));
        Self::new(reference, comps)
    }

    pub fn reference(&self) -> &Arc<RoughPath> {
        &self.reference
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k]
    }

    pub fn remainder(&self, k: usize) -> &Triangular {
        &self.remainders[k]
    }

    pub fn grid(&self) -> &TimeGrid {
        self.reference.grid()
    }
}

/// `Σ_k ||Y^(k)♯||_{(p-k)γ}`.
pub fn controlled_seminorm(y: &ControlledPath) -> f64 {
    let g = y.reference.gamma();
    let p = y.p();
    (0..p).map(|k| holder_sup(&y.remainders[k], y.grid(), (p - k) as f64 * g)).sum()
}

/// `Σ_k ||Y^(k)♯ - Ỹ^(k)♯||_{(p-k)γ}`; the references may differ.
pub fn controlled_distance(a: &ControlledPath, b: &ControlledPath) -> Result<f64> {
    if a.grid() != b.grid() || a.p() != b.p() {
        return dim("controlled paths live on different grids or levels");
    }
    let g = a.reference.gamma();
    let p = a.p();
    Ok((0..p)
        .map(|k| {
            let d = a.remainders[k].zip_map(&b.remainders[k], |x, y| x - y);
            holder_sup(&d, a.grid(), (p - k) as f64 * g)
        })
        .sum())
}

/// Germ `Ξ_{st} = Σ_{n=1}^{p} Y^(n-1)_s X^(n)_{st}`.
pub fn integrand_germ(y: &ControlledPath) -> TwoParamFn {
    let x = &y.reference;
    let p = y.p();
    let npts = x.grid().len();
    let mut vals = Triangular::zeros(npts);
    for i in 0..npts - 1 {
        let row = vals.row_mut(i);
        for n in 1..=p {
            let c = y.components[n - 1][i];
            if c == 0.0 {
                continue;
            }
            for (v, l) in row.iter_mut().zip(x.level(n).row(i)) {
                *v += c * l;
            }
        }
    }
    let gamma = x.gamma();
    TwoParamFn { grid: *x.grid(), values: vals, alpha: gamma, beta: (p + 1) as f64 * gamma }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoughIntegral {
    /// `∫_0^{t_i} Y dX`.
    pub path: Vec<f64>,
    /// Sewing constant `max |(𝓘Ξ)_{st} - Ξ_{st}| / (t-s)^{(p+1)γ}`.
    pub constant: f64,
    /// Largest violation of `δΞ_{sut} = -Σ_k Y^(k-1)♯_{su} X^(k)_{ut}` on the checked triples.
    pub delta_defect: f64,
    pub warnings: Vec<String>,
}

/// Seminorm above which an integrand is reported as badly controlled.
pub const ILL_CONTROLLED: f64 = 1e8;

/// Grid indices sampled by the `δΞ` identity check.
fn check_indices(npts: usize) -> Vec<usize> {
    let stride = npts.div_ceil(96).max(1);
    let mut idx: Vec<usize> = (0..npts).step_by(stride).collect();
    if *idx.last().unwrap() != npts - 1 {
        idx.push(npts - 1);
    }
    idx
}

/// `max |δΞ_{sut} + Σ_k Y^(k-1)♯_{su} X^(k)_{ut}|` relative to the size of the terms.
pub fn delta_identity_defect(y: &ControlledPath, xi: &TwoParamFn) -> f64 {
    let x = &y.reference;
    let p = y.p();
    let idx = check_indices(x.grid().len());
    let mut worst = 0.0f64;
    for (a, &s) in idx.iter().enumerate() {
        for (b, &u) in idx.iter().enumerate().skip(a + 1) {
            for &t in &idx[b + 1..] {
                let lhs = xi.delta(s, u, t);
                let mut rhs = 0.0;
                let mut scale = lhs.abs().max(1.0);
                for k in 1..=p {
                    let term = y.remainders[k - 1].get(s, u) * x.get(k, u, t);
                    scale = scale.max(term.abs());
                    rhs -= term;
                }
                worst = worst.max((lhs - rhs).abs() / scale);
            }
        }
    }
    worst
}

/// Rough integral `∫ Y dX` via the sewing map applied to the controlled germ.
pub fn rough_integral(y: &ControlledPath) -> Result<RoughIntegral> {
    let gamma = y.reference.gamma();
    let p = y.p();
    if (p + 1) as f64 * gamma <= 1.0 {
        return param(format!("(p + 1) gamma = {} must exceed 1", (p + 1) as f64 * gamma));
    }
    let xi = integrand_germ(y);
    let delta_defect = delta_identity_defect(y, &xi);
    if delta_defect > 1e-10 {
        return Err(Error::Numerical(format!("δΞ identity violated by {delta_defect:e}")));
    }
    let sewn = sewing_integrate(&xi)?;
    let mut warnings = Vec::new();
    let norm = controlled_seminorm(y);
    if !(norm < ILL_CONTROLLED) {
        warnings.push(format!("ill-controlled integrand: remainder seminorm {norm:e}"));
    }
    Ok(RoughIntegral { path: sewn.path, constant: sewn.constant, delta_defect, warnings })
}

/// Rough value, Stieltjes-trapezoid value and their gap for a smooth driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Consistency {
    pub rough: f64,
    pub quadrature: f64,
    pub gap: f64,
}

/// Compares `∫ Y dX` (plain controlled path over the geometric lift) with `Σ (Y_i + Y_{i+1}) ΔX_i / 2`.
pub fn smooth_consistency_check(grid: &TimeGrid, y: &[f64], x: &[f64]) -> Result<Consistency> {
    if y.len() != grid.len() || x.len() != grid.len() {
        return dim("samples do not match the grid");
    }
    let lift = Arc::new(geometric_lift(grid, x, 0.3)?);
    let ctrl = ControlledPath::plain(lift, y.to_vec())?;
    let rough = *rough_integral(&ctrl)?.path.last().unwrap();
    let quadrature: f64 = y.windows(2).zip(x.windows(2)).map(|(a, b)| 0.5 * (a[0] + a[1]) * (b[1] - b[0])).sum();
    Ok(Consistency { rough, quadrature, gap: (rough - quadrature).abs() })
}

/// Lift of `t ↦ η(φ_t)`: components `η^(k)(φ_t)` for `k < p`.
pub fn lift_composition(eta: &dyn Smooth, traj: Trajectory<'_>, x: Arc<RoughPath>) -> Result<ControlledPath> {
    let p = x.p();
    eta.require_order(p + 1)?;
    if traj.phi.len() != x.grid().len() {
        return dim("trajectory does not match the rough path grid");
    }
    let mut comps = vec![vec![0.0; traj.phi.len()]; p];
    let mut jet = vec![0.0; p];
    for (i, &v) in traj.phi.iter().enumerate() {
        eta.jet(v, &mut jet);
        for k in 0..p {
            comps[k][i] = jet[k];
        }
    }
    ControlledPath::new(x, comps)
}

/// Taylor remainder `f(b) - Σ_{n<=m} f^(n)(a) (b-a)^n / n!` from a jet at `a`.
fn taylor_remainder(jet_a: &[f64], fb: f64, delta: f64, m: usize) -> f64 {
    let mut acc = 0.0;
    let mut pow = 1.0;
    for (n, d) in jet_a.iter().take(m + 1).enumerate() {
        if n > 0 {
            pow *= delta / n as f64;
        }
        acc += d * pow;
    }
    fb - acc
}

/// Largest gap between the cached remainders and the expansion in `X` and `R^φ`:
/// `Y^(k)♯ = Σ_{n=1}^{p-k-1} Σ_{q=1}^{n} η^(k+n)(φ_s) X^(n-q) (R^φ)^q / q! + R^{η^(k)}_{p-k-1}(φ_s, φ_t)`.
pub fn decomposition_defect(eta: &dyn Smooth, traj: Trajectory<'_>, y: &ControlledPath) -> f64 {
    let x = y.reference();
    let p = y.p();
    let npts = traj.phi.len();
    let mut worst = 0.0f64;
    let mut ja = vec![0.0; p];
    let mut jb = vec![0.0; p];
    for s in 0..npts {
        eta.jet(traj.phi[s], &mut ja);
        for t in s + 1..npts {
            eta.jet(traj.phi[t], &mut jb);
            let r = traj.remainder(s, t);
            let delta = traj.phi[t] - traj.phi[s];
            for k in 0..p {
                let mut expansion = 0.0;
                for n in 1..p - k {
                    let mut rq = 1.0;
                    for q in 1..=n {
                        rq *= r / q as f64;
                        expansion += ja[k + n] * x.get(n - q, s, t) * rq;
                    }
                }
                expansion += taylor_remainder(&ja[k..], jb[k], delta, p - k - 1);
                let scale = 1.0f64.max(expansion.abs());
                worst = worst.max((y.remainder(k).get(s, t) - expansion).abs() / scale);
            }
        }
    }
    worst
}

/// Finite signed measure `Σ w_j δ_{x_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SignedMeasure {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.len() != weights.len() {
            return dim("nodes and weights differ in length");
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return param("weights must be finite");
        }
        Ok(Self { nodes, weights })
    }

    pub fn dirac(x0: f64) -> Self {
        Self { nodes: vec![x0], weights: vec![1.0] }
    }

    /// Density `f` on `[a, b]` discretized with composite Simpson weights.
    pub fn from_density(f: impl Fn(f64) -> f64, a: f64, b: f64, nodes: usize) -> Self {
        let (xs, ws) = crate::quad::simpson(a, b, nodes);
        let weights = xs.iter().zip(&ws).map(|(x, w)| w * f(*x)).collect();
        Self { nodes: xs, weights }
    }

    pub fn total_variation(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

/// `t ↦ ∫ η(φ_t(x)) dμ(x)` as a controlled path: μ-weighted sums of the lifted components.
pub fn measure_lift(
    eta: &dyn Smooth,
    flow: &FlowField,
    mu: &SignedMeasure,
    x: Arc<RoughPath>,
) -> Result<ControlledPath> {
    let p = x.p();
    eta.require_order(p + 1)?;
    if flow.nodes.len() != mu.nodes.len() || flow.nodes.iter().zip(&mu.nodes).any(|(a, b)| a != b) {
        return dim("flow nodes and measure nodes differ");
    }
    let npts = x.grid().len();
    if flow.grid.len() != npts {
        return dim("flow grid does not match the rough path grid");
    }
    let mut comps = vec![vec![0.0; npts]; p];
    let mut jet = vec![0.0; p];
    for (j, w) in mu.weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        for (i, &v) in flow.phi[j].iter().enumerate() {
            eta.jet(v, &mut jet);
            for k in 0..p {
                comps[k][i] += w * jet[k];
            }
        }
    }
    ControlledPath::new(x, comps)
}

/// `max |(∫η(φ)dμ)^(k)♯ - ∫ η(φ(x))^(k)♯ dμ(x)|` relative to the remainder scale.
pub fn measure_remainder_defect(
    eta: &dyn Smooth,
    flow: &FlowField,
    mu: &SignedMeasure,
    lifted: &ControlledPath,
) -> Result<f64> {
    let x = lifted.reference().clone();
    let p = lifted.p();
    let npts = x.grid().len();
    let mut sums: Vec<Triangular> = (0..p).map(|_| Triangular::zeros(npts)).collect();
    for (j, w) in mu.weights.iter().enumerate() {
        let single = lift_composition(eta, flow.trajectory(j), x.clone())?;
        for k in 0..p {
            sums[k] = sums[k].zip_map(single.remainder(k), |a, b| a + w * b);
        }
    }
    let mut worst = 0.0f64;
    for k in 0..p {
        let scale = lifted.remainder(k).as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (a, b) in sums[k].as_slice().iter().zip(lifted.remainder(k).as_slice()) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    Ok(worst)
}
