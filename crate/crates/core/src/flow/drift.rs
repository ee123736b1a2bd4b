//! Bounded drifts, the mollified family and its monotone envelope.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::functions::unit_bump_jet;
use crate::quad::simpson;

/// A drift `b(t, x)`.
pub trait Drift: Send + Sync {
    fn eval(&self, t: f64, x: f64) -> f64;

    /// Spatial derivative, when available.
    fn deriv(&self, _t: f64, _x: f64) -> Option<f64> {
        None
    }

    /// `sup |b|`, infinite for unbounded drifts.
    fn sup_norm(&self) -> f64;

    fn is_smooth(&self) -> bool {
        false
    }

    /// True when `b(t, x)` does not depend on `t`.
    fn is_autonomous(&self) -> bool {
        false
    }
}

/// Named drifts, all time-homogeneous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DriftSpec {
    Zero,
    Constant { c: f64 },
    Cos { amp: f64 },
    Tanh { amp: f64 },
    /// `b(x) = a x`; unbounded, used only for closed-form checks.
    Linear { a: f64 },
    Sign { amp: f64 },
    Bump { center: f64, radius: f64, amp: f64 },
    /// Piecewise-linear interpolation of a table, constant outside.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl DriftSpec {
    pub fn validate(&self) -> Result<()> {
        if let DriftSpec::Table { xs, ys } = self {
            if xs.len() != ys.len() || xs.is_empty() || xs.windows(2).any(|w| w[1] <= w[0]) {
                return param("drift table needs matching, strictly increasing abscissae");
            }
        }
        Ok(())
    }
}

impl Drift for DriftSpec {
    fn eval(&self, _t: f64, x: f64) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::Constant { c } => *c,
            DriftSpec::Cos { amp } => amp * x.cos(),
            DriftSpec::Tanh { amp } => amp * x.tanh(),
            DriftSpec::Linear { a } => a * x,
            DriftSpec::Sign { amp } => {
                if x > 0.0 {
                    *amp
                } else if x < 0.0 {
                    -amp
                } else {
                    0.0
                }
            }
            DriftSpec::Bump { center, radius, amp } => {
                let mut v = [0.0];
                unit_bump_jet((x - center) / radius, &mut v);
                amp * v[0]
            }
            DriftSpec::Table { xs, ys } => {
                if x <= xs[0] {
                    return ys[0];
                }
                if x >= xs[xs.len() - 1] {
                    return ys[ys.len() - 1];
                }
                let k = xs.partition_point(|&v| v <= x);
                let (x0, x1, y0, y1) = (xs[k - 1], xs[k], ys[k - 1], ys[k]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    fn deriv(&self, _t: f64, x: f64) -> Option<f64> {
        match self {
            DriftSpec::Zero | DriftSpec::Constant { .. } => Some(0.0),
            DriftSpec::Cos { amp } => Some(-amp * x.sin()),
            DriftSpec::Tanh { amp } => {
                let t = x.tanh();
                Some(amp * (1.0 - t * t))
            }
            DriftSpec::Linear { a } => Some(*a),
            DriftSpec::Bump { center, radius, amp } => {
                let mut v = [0.0; 2];
                unit_bump_jet((x - center) / radius, &mut v);
                Some(amp * v[1] / radius)
            }
            DriftSpec::Sign { .. } | DriftSpec::Table { .. } => None,
        }
    }

    fn sup_norm(&self) -> f64 {
        match self {
            DriftSpec::Zero => 0.0,
            DriftSpec::Constant { c } => c.abs(),
            DriftSpec::Cos { amp } | DriftSpec::Tanh { amp } | DriftSpec::Sign { amp } => amp.abs(),
            DriftSpec::Bump { amp, .. } => amp.abs() * (-1.0f64).exp(),
            DriftSpec::Linear { a } => {
                if *a == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            DriftSpec::Table { ys, .. } => ys.iter().fold(0.0, |m, y| m.max(y.abs())),
        }
    }

    fn is_smooth(&self) -> bool {
        !matches!(self, DriftSpec::Sign { .. } | DriftSpec::Table { .. })
    }

    fn is_autonomous(&self) -> bool {
        true
    }
}

/// A drift given by closures.
pub struct FnDrift<F, G> {
    pub f: F,
    pub df: Option<G>,
    pub sup: f64,
}

impl<F, G> Drift for FnDrift<F, G>
where
    F: Fn(f64, f64) -> f64 + Send + Sync,
    G: Fn(f64, f64) -> f64 + Send + Sync,
{
    fn eval(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }

    fn deriv(&self, t: f64, x: f64) -> Option<f64> {
        self.df.as_ref().map(|g| g(t, x))
    }

    fn sup_norm(&self) -> f64 {
        self.sup
    }

    fn is_smooth(&self) -> bool {
        self.df.is_some()
    }
}

/// Quadrature nodes of the mass-one bump on `(-1, 1)`.
pub const MOLLIFIER_NODES: usize = 201;
const NODE_BUDGET: usize = 100_001;

/// `b_n(t, x) = n ∫ ρ(n(x - y)) b(t, y) dy` by quadrature on the support of `ρ`.
#[derive(Clone)]
pub struct Mollified {
    base: Arc<dyn Drift>,
    n: f64,
    shifts: Vec<f64>,
    w_val: Vec<f64>,
    w_der: Vec<f64>,
}

impl std::fmt::Debug for Mollified {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Mollified").field("n", &self.n).field("nodes", &self.shifts.len()).finish()
    }
}

pub fn mollify(base: Arc<dyn Drift>, n: usize) -> Result<Mollified> {
    mollify_with(base, n, MOLLIFIER_NODES)
}

pub fn mollify_with(base: Arc<dyn Drift>, n: usize, nodes: usize) -> Result<Mollified> {
    if n == 0 {
        return param("mollification level must be positive");
    }
    if !(3..=NODE_BUDGET).contains(&nodes) {
        return param(format!("mollifier quadrature with {nodes} nodes is outside [3, {NODE_BUDGET}]"));
    }
    let (zs, ws) = simpson(-1.0, 1.0, nodes);
    let mut shifts = Vec::new();
    let mut w_val = Vec::new();
    let mut w_der = Vec::new();
    for (z, w) in zs.iter().zip(&ws) {
        let mut jet = [0.0; 2];
        unit_bump_jet(*z, &mut jet);
        if jet[0] == 0.0 {
            continue;
        }
        shifts.push(z / n as f64);
        w_val.push(w * jet[0]);
        w_der.push(w * jet[1] * n as f64);
    }
    let mass: f64 = w_val.iter().sum();
    w_val.iter_mut().for_each(|w| *w /= mass);
    w_der.iter_mut().for_each(|w| *w /= mass);
    Ok(Mollified { base, n: n as f64, shifts, w_val, w_der })
}

impl Mollified {
    pub fn level(&self) -> f64 {
        self.n
    }
}

impl Drift for Mollified {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self.shifts.iter().zip(&self.w_val).map(|(s, w)| w * self.base.eval(t, x - s)).sum()
    }

    fn deriv(&self, t: f64, x: f64) -> Option<f64> {
        Some(self.shifts.iter().zip(&self.w_der).map(|(s, w)| w * self.base.eval(t, x - s)).sum())
    }

    fn sup_norm(&self) -> f64 {
        self.base.sup_norm()
    }

    fn is_smooth(&self) -> bool {
        true
    }

    fn is_autonomous(&self) -> bool {
        self.base.is_autonomous()
    }
}

/// Truncation of the infinite envelope.
pub const ENVELOPE_KMAX: usize = 256;

/// Pointwise minimum `b̃_{n,k} = min_{n <= j <= k} b_j`.
#[derive(Debug, Clone)]
pub struct Envelope {
    members: Vec<Mollified>,
}

pub fn monotone_envelope(base: Arc<dyn Drift>, n: usize, k: usize) -> Result<Envelope> {
    if n == 0 || k < n || k > ENVELOPE_KMAX {
        return param(format!("envelope indices need 1 <= n <= k <= {ENVELOPE_KMAX}, got ({n}, {k})"));
    }
    let members = (n..=k).map(|j| mollify(base.clone(), j)).collect::<Result<_>>()?;
    Ok(Envelope { members })
}

impl Drift for Envelope {
    fn eval(&self, t: f64, x: f64) -> f64 {
        self.members.iter().map(|m| m.eval(t, x)).fold(f64::INFINITY, f64::min)
    }

    fn deriv(&self, t: f64, x: f64) -> Option<f64> {
        let arg = self
            .members
            .iter()
            .map(|m| (m.eval(t, x), m))
            .min_by(|a, b| a.0.total_cmp(&b.0))?;
        arg.1.deriv(t, x)
    }

    fn sup_norm(&self) -> f64 {
        self.members[0].sup_norm()
    }
}

/// Time-reversed, sign-flipped drift `-b(t0 - r, z)` of the inverse flow.
pub struct Reversed<'a> {
    pub inner: &'a dyn Drift,
    pub t0: f64,
}

impl Drift for Reversed<'_> {
    fn eval(&self, r: f64, z: f64) -> f64 {
        -self.inner.eval(self.t0 - r, z)
    }

    fn deriv(&self, r: f64, z: f64) -> Option<f64> {
        self.inner.deriv(self.t0 - r, z).map(|d| -d)
    }

    fn sup_norm(&self) -> f64 {
        self.inner.sup_norm()
    }

    fn is_smooth(&self) -> bool {
        self.inner.is_smooth()
    }
}
