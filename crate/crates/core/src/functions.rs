//! Smooth scalar functions with derivatives on demand.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// A scalar function that can report its derivatives at a point.
pub trait Smooth: Send + Sync {
    /// Fills `out[k]` with the `k`-th derivative at `x` for every `k < out.len()`.
    fn jet(&self, x: f64, out: &mut [f64]);

    /// Highest derivative order available, `None` when unlimited.
    fn max_order(&self) -> Option<usize> {
        None
    }

    fn value(&self, x: f64) -> f64 {
        let mut v = [0.0];
        self.jet(x, &mut v);
        v[0]
    }

    fn derivative(&self, x: f64) -> f64 {
        let mut v = [0.0; 2];
        self.jet(x, &mut v);
        v[1]
    }

    fn require_order(&self, order: usize) -> Result<()> {
        match self.max_order() {
            Some(m) if m < order => param(format!(
                "function provides derivatives up to order {m}, {order} required"
            )),
            _ => Ok(()),
        }
    }
}

/// Named smooth functions used as test functions, initial data and integrands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothFn {
    Identity,
    Square,
    Sin,
    Cos,
    Tanh,
    Constant { value: f64 },
    /// `amp * exp(-1/(1-z^2))` with `z = (x - center)/radius`, zero outside.
    Bump { center: f64, radius: f64, amp: f64 },
    /// Bump multiplied by `sin(freq * (x - center))`.
    SineBump { center: f64, radius: f64, freq: f64 },
    /// `amp * exp(-z^2/2)` with `z = (x - center)/width`.
    Gaussian { center: f64, width: f64, amp: f64 },
}

impl SmoothFn {
    pub fn bump(center: f64, radius: f64) -> Self {
        SmoothFn::Bump { center, radius, amp: 1.0 }
    }

    /// Interval outside of which the function vanishes identically.
    pub fn support(&self) -> Option<(f64, f64)> {
        match *self {
            SmoothFn::Bump { center, radius, .. } | SmoothFn::SineBump { center, radius, .. } => {
                Some((center - radius, center + radius))
            }
            SmoothFn::Constant { value: 0.0 } => Some((0.0, 0.0)),
            _ => None,
        }
    }
}

/// Derivatives of the unit bump `exp(-1/(1-x^2))`.
pub fn unit_bump_jet(x: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    if x.abs() >= 1.0 || out.is_empty() {
        return;
    }
    let f0 = (-1.0 / (1.0 - x * x)).exp();
    if f0 == 0.0 {
        return;
    }
    out[0] = f0;
    let order = out.len() - 1;
    if order == 0 {
        return;
    }
    // g = -1/(1-x^2) = -(1/(1-x) + 1/(1+x))/2 and f' = g' f
    let (a, b) = (1.0 / (1.0 - x), 1.0 / (1.0 + x));
    let mut g = vec![0.0; order + 1];
    let (mut pa, mut pb, mut fact) = (a, b, 1.0);
    for (k, gk) in g.iter_mut().enumerate().skip(1) {
        fact *= k as f64;
        pa *= a;
        pb *= -b;
        *gk = -0.5 * fact * (pa + pb);
    }
    for n in 1..=order {
        let mut acc = 0.0;
        let mut binom = 1.0;
        for j in 0..n {
            acc += binom * g[j + 1] * out[n - 1 - j];
            binom = binom * (n - 1 - j) as f64 / (j + 1) as f64;
        }
        out[n] = acc;
    }
}

/// Polynomials `P_k` with `tanh^(k)(x) = P_k(tanh x)`, coefficients in ascending powers.
fn tanh_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![0.0, 1.0]];
        for _ in 0..16 {
            let p = polys.last().unwrap();
            // d/dx P(T) = P'(T) (1 - T^2)
            let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
            let mut q = vec![0.0; dp.len() + 2];
            for (i, c) in dp.iter().enumerate() {
                q[i] += c;
                q[i + 2] -= c;
            }
            polys.push(q);
        }
        polys
    })
}

fn leibniz(f: &[f64], g: &[f64], out: &mut [f64]) {
    for n in 0..out.len() {
        let mut binom = 1.0;
        let mut acc = 0.0;
        for k in 0..=n {
            acc += binom * f[k] * g[n - k];
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
        out[n] = acc;
    }
}

impl Smooth for SmoothFn {
    fn jet(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        match *self {
            SmoothFn::Identity => {
                out.iter_mut().for_each(|v| *v = 0.0);
                if n > 0 {
                    out[0] = x;
                }
                if n > 1 {
                    out[1] = 1.0;
                }
            }
            SmoothFn::Square => {
                out.iter_mut().for_each(|v| *v = 0.0);
                let vals = [x * x, 2.0 * x, 2.0];
                for (o, v) in out.iter_mut().zip(vals) {
                    *o = v;
                }
            }
            SmoothFn::Sin | SmoothFn::Cos => {
                let (s, c) = x.sin_cos();
                let cycle = [s, c, -s, -c];
                let shift = if matches!(self, SmoothFn::Cos) { 1 } else { 0 };
                for (k, o) in out.iter_mut().enumerate() {
                    *o = cycle[(k + shift) % 4];
                }
            }
            SmoothFn::Tanh => {
                let t = x.tanh();
                let polys = tanh_polys();
                assert!(n <= polys.len(), "tanh derivatives beyond order {}", polys.len() - 1);
                for (o, poly) in out.iter_mut().zip(polys) {
                    *o = poly.iter().rev().fold(0.0, |acc, c| acc * t + c);
                }
            }
            SmoothFn::Constant { value } => {
                out.iter_mut().for_each(|v| *v = 0.0);
                if n > 0 {
                    out[0] = value;
                }
            }
            SmoothFn::Bump { center, radius, amp } => {
                unit_bump_jet((x - center) / radius, out);
                let mut scale = amp;
                for o in out.iter_mut() {
                    *o *= scale;
                    scale /= radius;
                }
            }
            SmoothFn::SineBump { center, radius, freq } => {
                let mut bump = vec![0.0; n];
                SmoothFn::bump(center, radius).jet(x, &mut bump);
                let (s, c) = (freq * (x - center)).sin_cos();
                let cycle = [s, c, -s, -c];
                let mut sine = vec![0.0; n];
                let mut scale = 1.0;
                for (k, v) in sine.iter_mut().enumerate() {
                    *v = scale * cycle[k % 4];
                    scale *= freq;
                }
                leibniz(&bump, &sine, out);
            }
            SmoothFn::Gaussian { center, width, amp } => {
                let z = (x - center) / width;
                let e = amp * (-0.5 * z * z).exp();
                // d^k/dz^k e^{-z^2/2} = (-1)^k He_k(z) e^{-z^2/2}
                let (mut h0, mut h1) = (1.0, z);
                let mut scale = 1.0;
                for (k, o) in out.iter_mut().enumerate() {
                    let he = if k == 0 { h0 } else { h1 };
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    *o = sign * he * e * scale;
                    scale /= width;
                    if k >= 1 {
                        let h2 = z * h1 - k as f64 * h0;
                        h0 = h1;
                        h1 = h2;
                    }
                }
            }
        }
    }

    fn max_order(&self) -> Option<usize> {
        match self {
            SmoothFn::Tanh => Some(tanh_polys().len() - 1),
            _ => None,
        }
    }
}

/// A function given by explicit closures for its value and first few derivatives.
pub struct ClosureFn {
    derivs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl ClosureFn {
    pub fn new(derivs: Vec<Box<dyn Fn(f64) -> f64 + Send + Sync>>) -> Self {
        Self { derivs }
    }
}

impl Smooth for ClosureFn {
    fn jet(&self, x: f64, out: &mut [f64]) {
        assert!(out.len() <= self.derivs.len(), "derivative order not available");
        for (o, f) in out.iter_mut().zip(&self.derivs) {
            *o = f(x);
        }
    }

    fn max_order(&self) -> Option<usize> {
        Some(self.derivs.len().saturating_sub(1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finite_difference_agrees(f: &SmoothFn, x: f64, order: usize) {
        let h = 1e-5;
        let mut lo = vec![0.0; order + 2];
        let mut hi = vec![0.0; order + 2];
        let mut mid = vec![0.0; order + 2];
        f.jet(x - h, &mut lo);
        f.jet(x + h, &mut hi);
        f.jet(x, &mut mid);
        for k in 0..=order {
            let fd = (hi[k] - lo[k]) / (2.0 * h);
            let tol = 1e-5 * (1.0 + mid[k + 1].abs());
            assert!((fd - mid[k + 1]).abs() < tol, "{f:?} order {k}: fd {fd} vs {}", mid[k + 1]);
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let fns = [
            SmoothFn::Sin,
            SmoothFn::Cos,
            SmoothFn::Tanh,
            SmoothFn::Square,
            SmoothFn::Bump { center: 0.3, radius: 1.5, amp: 2.0 },
            SmoothFn::SineBump { center: -0.2, radius: 1.0, freq: 3.0 },
            SmoothFn::Gaussian { center: 0.1, width: 0.7, amp: 1.0 },
        ];
        for f in &fns {
            for &x in &[-0.6, 0.05, 0.4] {
                finite_difference_agrees(f, x, 5);
            }
        }
    }

    #[test]
    fn bump_vanishes_outside_support() {
        let mut out = [1.0; 4];
        SmoothFn::bump(0.0, 1.0).jet(1.0, &mut out);
        assert_eq!(out, [0.0; 4]);
        SmoothFn::bump(0.0, 1.0).jet(0.9999, &mut out);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn tanh_second_derivative_closed_form() {
        let x = 0.7f64;
        let mut out = [0.0; 3];
        SmoothFn::Tanh.jet(x, &mut out);
        let t = x.tanh();
        assert!((out[2] + 2.0 * t * (1.0 - t * t)).abs() < 1e-14);
    }

    #[test]
    fn closure_fn_reports_its_order() {
        let f = ClosureFn::new(vec![Box::new(|x| x), Box::new(|_| 1.0)]);
        assert!(f.require_order(1).is_ok());
        assert!(f.require_order(2).is_err());
    }
}
