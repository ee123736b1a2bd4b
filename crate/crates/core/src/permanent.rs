//! Permanents of the tridiagonal covariance matrices: the recursion `f_m`, its
//! polynomial form `p_m`, term counts, coefficient bounds and the simplex integral.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{param, Error, Result};
use crate::stats::Estimate;

/// Times `0 < s_1 < .. < s_m` and the Hurst parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TridiagSpec {
    pub s: Vec<f64>,
    pub hurst: f64,
}

impl TridiagSpec {
    pub fn new(s: Vec<f64>, hurst: f64) -> Result<Self> {
        if s.is_empty() {
            return param("need at least one time point");
        }
        if s[0] <= 0.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Singular("time points must be positive and strictly increasing".into()));
        }
        Ok(Self { s, hurst })
    }

    pub fn m(&self) -> usize {
        self.s.len()
    }

    /// `x_1 = s_1^{-2H}`, `x_j = (s_j - s_{j-1})^{-2H}`.
    pub fn variables(&self) -> Vec<f64> {
        let e = -2.0 * self.hurst;
        (0..self.m()).map(|j| if j == 0 { self.s[0] } else { self.s[j] - self.s[j - 1] }.powf(e)).collect()
    }

    /// Diagonal `a_j` and off-diagonal `b_j`, indexed `j = 1..=m` (entry 0 of `b` unused).
    pub fn coefficients(&self) -> (Vec<f64>, Vec<f64>) {
        let x = self.variables();
        let m = self.m();
        let a = (0..m).map(|j| if j == 0 { x[0] } else { x[j] + x[j - 1] }).collect();
        let b = (0..m).map(|j| if j == 0 { 0.0 } else { -x[j - 1] }).collect();
        (a, b)
    }

    /// The tridiagonal matrix with `a_m, .., a_1` on the diagonal and `b_m, .., b_2` beside it.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let m = self.m();
        let (a, b) = self.coefficients();
        let mut out = vec![vec![0.0; m]; m];
        for r in 0..m {
            let j = m - 1 - r;
            out[r][r] = a[j];
            if r + 1 < m {
                out[r][r + 1] = b[j];
                out[r + 1][r] = b[j];
            }
        }
        out
    }
}

/// `f_m` by the two-term recursion.
pub fn f_m_recursive(spec: &TridiagSpec) -> f64 {
    let x = spec.variables();
    let m = x.len();
    let mut prev2 = 1.0;
    let mut prev = x[0];
    if m == 1 {
        return prev;
    }
    let mut cur = x[1] * x[0] + 2.0 * x[0] * x[0];
    for j in 2..m {
        prev2 = prev;
        prev = cur;
        cur = (x[j] + x[j - 1]) * prev + x[j - 1] * x[j - 1] * prev2;
    }
    let _ = prev2;
    cur
}

/// Double-double accumulator for the inclusion–exclusion sums.
#[derive(Clone, Copy, Debug, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn from(v: f64) -> Self {
        Self { hi: v, lo: 0.0 }
    }

    fn add(self, o: Dd) -> Dd {
        let s = self.hi + o.hi;
        let bb = s - self.hi;
        let err = (self.hi - (s - bb)) + (o.hi - bb);
        let lo = err + self.lo + o.lo;
        let hi = s + lo;
        Dd { hi, lo: lo - (hi - s) }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let err = self.hi.mul_add(o.hi, -p);
        let lo = err + self.hi * o.lo + self.lo * o.hi;
        let hi = p + lo;
        Dd { hi, lo: lo - (hi - p) }
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

/// Largest matrix accepted by [`brute_permanent`].
pub const MAX_BRUTE: usize = 10;

/// Permanent by Ryser's formula, accumulated in double-double precision.
pub fn brute_permanent(a: &[Vec<f64>]) -> Result<f64> {
    let n = a.len();
    if n > MAX_BRUTE {
        return Err(Error::Size(format!("{n}x{n} permanent exceeds the {MAX_BRUTE}x{MAX_BRUTE} limit")));
    }
    if a.iter().any(|r| r.len() != n) {
        return param("matrix must be square");
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut total = Dd::default();
    for subset in 1u32..(1 << n) {
        let mut prod = Dd::from(1.0);
        for row in a {
            let mut sum = Dd::default();
            for (j, v) in row.iter().enumerate() {
                if subset & (1 << j) != 0 {
                    sum = sum.add(Dd::from(*v));
                }
            }
            prod = prod.mul(sum);
        }
        let sign_neg = (n - subset.count_ones() as usize) % 2 == 1;
        total = total.add(if sign_neg { prod.neg() } else { prod });
    }
    Ok(total.hi + total.lo)
}

/// Polynomial in `x_1..x_m` with exponents in `{0, 1, 2}` packed base 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexPoly {
    pub m: usize,
    pub terms: BTreeMap<u64, u64>,
    /// Number of monomials generated by the recursion before like terms are merged.
    pub raw_terms: u64,
}

/// Largest `m` accepted by [`p_m_expand`].
pub const MAX_EXPAND: usize = 14;

fn pow3(i: usize) -> u64 {
    3u64.pow(i as u32)
}

impl MultiIndexPoly {
    pub fn exponents(&self, key: u64) -> Vec<u8> {
        let mut k = key;
        (0..self.m)
            .map(|_| {
                let d = (k % 3) as u8;
                k /= 3;
                d
            })
            .collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(&key, &c)| {
                self.exponents(key).iter().zip(x).fold(c as f64, |acc, (&e, &v)| acc * v.powi(e as i32))
            })
            .sum()
    }

    pub fn degree_in(&self, var: usize) -> u8 {
        self.terms.keys().map(|&k| self.exponents(k)[var]).max().unwrap_or(0)
    }

    pub fn max_coefficient(&self) -> u64 {
        self.terms.values().cloned().max().unwrap_or(0)
    }

    fn times_var(&self, var: usize, power: u32, m: usize) -> Result<BTreeMap<u64, u64>> {
        let mut out = BTreeMap::new();
        for (&k, &c) in &self.terms {
            let e = (k / pow3(var)) % 3;
            if e + power as u64 > 2 {
                return Err(Error::Numerical(format!("exponent of x_{} exceeds 2", var + 1)));
            }
            *out.entry(k + power as u64 * pow3(var)).or_insert(0) += c;
        }
        let _ = m;
        Ok(out)
    }
}

/// `p_m = (x_m + x_{m-1}) p_{m-1} + x_{m-1}^2 p_{m-2}`, `p_1 = x_1`, `p_2 = x_2 x_1 + 2 x_1^2`.
pub fn p_m_expand(m: usize) -> Result<MultiIndexPoly> {
    if m == 0 || m > MAX_EXPAND {
        return Err(Error::Size(format!("expansion supports 1 <= m <= {MAX_EXPAND}, got {m}")));
    }
    let p1 = MultiIndexPoly { m: 1, terms: BTreeMap::from([(1, 1)]), raw_terms: 1 };
    if m == 1 {
        return Ok(p1);
    }
    let p2 = MultiIndexPoly { m: 2, terms: BTreeMap::from([(1 + 3, 1), (2, 2)]), raw_terms: 2 };
    let (mut older, mut old) = (p1, p2);
    for k in 3..=m {
        let (xk, xk1) = (k - 1, k - 2);
        let mut terms = old.times_var(xk, 1, k)?;
        for (key, c) in old.times_var(xk1, 1, k)? {
            *terms.entry(key).or_insert(0) += c;
        }
        for (key, c) in older.times_var(xk1, 2, k)? {
            *terms.entry(key).or_insert(0) += c;
        }
        let next = MultiIndexPoly { m: k, terms, raw_terms: 2 * old.raw_terms + older.raw_terms };
        older = old;
        old = next;
    }
    Ok(old)
}

/// `γ_m = 2 γ_{m-1} + γ_{m-2}`, `γ_1 = 1`, `γ_2 = 2`.
pub fn gamma_m(m: usize) -> u64 {
    let (mut a, mut b) = (1u64, 2u64);
    match m {
        0 => 0,
        1 => 1,
        _ => {
            for _ in 2..m {
                let c = 2 * b + a;
                a = b;
                b = c;
            }
            b
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub m: usize,
    pub degree_last: u8,
    pub max_degree_other: u8,
    pub max_coefficient: u64,
    pub raw_terms: u64,
    pub distinct_terms: usize,
    pub ok: bool,
}

/// Degree, positivity and `c_α <= 3^m` checks on the expanded polynomials.
pub fn bounds_check(ms: std::ops::RangeInclusive<usize>) -> Result<Vec<BoundsRow>> {
    ms.map(|m| {
        let p = p_m_expand(m)?;
        let degree_last = p.degree_in(m - 1);
        let max_degree_other = (0..m - 1).map(|v| p.degree_in(v)).max().unwrap_or(0);
        let max_coefficient = p.max_coefficient();
        let positive = p.terms.values().all(|&c| c > 0);
        let ok = degree_last == 1 && max_degree_other <= 2 && max_coefficient <= pow3(m) && positive;
        Ok(BoundsRow {
            m,
            degree_last,
            max_degree_other,
            max_coefficient,
            raw_terms: p.raw_terms,
            distinct_terms: p.terms.len(),
            ok,
        })
    })
    .collect()
}

/// Monte-Carlo value of `∫_{0<s_1<..<s_m<t} √f_m Π_{j=1}^{m} (s_j - s_{j-1})^{-H} ds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexIntegral {
    pub m: usize,
    pub hurst: f64,
    pub t: f64,
    pub estimate: Estimate,
}

const STRATUM: usize = 4096;

/// Largest accepted relative standard error.
pub const MAX_RELATIVE_SE: f64 = 0.05;

/// Importance sampling with Dirichlet gaps of exponent `1 - 3H` absorbing the singularities.
pub fn simplex_integral(m: usize, hurst: f64, t: f64, samples: usize, seed: u64) -> Result<SimplexIntegral> {
    if m == 0 || m > 8 {
        return Err(Error::Size(format!("simplex integral supports 1 <= m <= 8, got {m}")));
    }
    if !(hurst > 0.0 && hurst < 1.0 / 3.0) {
        return param("the simplex integral needs 0 < H < 1/3");
    }
    let a = 1.0 - 3.0 * hurst;
    let ga = Gamma::new(a, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let g1 = Gamma::new(1.0, 1.0).map_err(|e| Error::Parameter(e.to_string()))?;
    let log_norm = ln_gamma(m as f64 * a + 1.0) - m as f64 * ln_gamma(a);
    let strata = samples.div_ceil(STRATUM);
    let vals: Vec<f64> = (0..strata)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let want = STRATUM.min(samples - k * STRATUM);
            let mut out = Vec::with_capacity(want);
            let mut gaps = vec![0.0; m + 1];
            while out.len() < want {
                for (j, g) in gaps.iter_mut().enumerate() {
                    *g = if j < m { ga.sample(&mut rng) } else { g1.sample(&mut rng) };
                }
                if gaps[..m].iter().any(|&g| g <= 0.0) {
                    continue;
                }
                let total: f64 = gaps.iter().sum();
                let v: Vec<f64> = gaps.iter().map(|g| g / total).collect();
                let mut s = Vec::with_capacity(m);
                let mut acc = 0.0;
                for vj in &v[..m] {
                    acc += t * vj;
                    s.push(acc);
                }
                let Ok(spec) = TridiagSpec::new(s, hurst) else { continue };
                let f = f_m_recursive(&spec);
                let log_g = 0.5 * f.ln() - hurst * v[..m].iter().map(|vj| (t * vj).ln()).sum::<f64>();
                let log_dens = log_norm + (a - 1.0) * v[..m].iter().map(|vj| vj.ln()).sum::<f64>();
                out.push(t.powi(m as i32) * (log_g - log_dens).exp());
            }
            out
        })
        .collect::<Vec<_>>()
        .concat();
    let estimate = Estimate::from_samples(&vals);
    if estimate.stderr > MAX_RELATIVE_SE * estimate.mean.abs() {
        return Err(Error::Resolution(format!(
            "relative standard error {:.3} above {MAX_RELATIVE_SE}",
            estimate.stderr / estimate.mean
        )));
    }
    Ok(SimplexIntegral { m, hurst, t, estimate })
}

/// `C^m / Γ(m(1-3H) + 1)`.
pub fn envelope(c: f64, m: usize, hurst: f64) -> f64 {
    c.powi(m as i32) / gamma(m as f64 * (1.0 - 3.0 * hurst) + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub hurst: f64,
    pub t: f64,
    pub fitted_c: f64,
    pub rows: Vec<(usize, f64, f64)>,
    pub dominated: bool,
}

/// Fits `C` at `m = 2` and compares the envelope with the integral for the remaining `m`.
pub fn integral_estimate_check(ms: &[usize], hurst: f64, t: f64, samples: usize, seed: u64) -> Result<EnvelopeReport> {
    let i2 = simplex_integral(2, hurst, t, samples, seed)?.estimate.mean;
    let fitted_c = (i2 * gamma(2.0 * (1.0 - 3.0 * hurst) + 1.0)).sqrt();
    let mut rows = Vec::new();
    for &m in ms {
        let v = simplex_integral(m, hurst, t, samples, seed.wrapping_add(m as u64))?.estimate.mean;
        rows.push((m, v, envelope(fitted_c, m, hurst)));
    }
    let dominated = rows.iter().all(|&(_, v, e)| v <= e);
    Ok(EnvelopeReport { hurst, t, fitted_c, rows, dominated })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recursion_base_values() {
        let f1 = f_m_recursive(&TridiagSpec::new(vec![4.0], 0.25).unwrap());
        assert!((f1 - 0.5).abs() < 1e-15);
        let f2 = f_m_recursive(&TridiagSpec::new(vec![1.0, 2.0], 0.25).unwrap());
        assert!((f2 - 3.0).abs() < 1e-15);
    }

    #[test]
    fn three_point_recursion_matches_ryser() {
        let spec = TridiagSpec::new(vec![1.0, 2.0, 3.0], 0.25).unwrap();
        let brute = brute_permanent(&spec.matrix()).unwrap();
        assert!((f_m_recursive(&spec) - brute).abs() < 1e-13 * brute);
    }

    #[test]
    fn small_permanents() {
        let (a, b, c) = (1.5, -0.7, 2.0);
        assert!((brute_permanent(&[vec![a, b], vec![b, c]]).unwrap() - (a * c + b * b)).abs() < 1e-15);
        let id: Vec<Vec<f64>> = (0..5).map(|i| (0..5).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        assert_eq!(brute_permanent(&id).unwrap(), 1.0);
        assert_eq!(brute_permanent(&vec![vec![1.0; 4]; 4]).unwrap(), 24.0);
        assert!(matches!(brute_permanent(&vec![vec![1.0; 11]; 11]), Err(Error::Size(_))));
    }

    #[test]
    fn coincident_times_are_singular() {
        assert!(matches!(TridiagSpec::new(vec![1.0, 1.0], 0.25), Err(Error::Singular(_))));
    }

    #[test]
    fn second_and_third_polynomials() {
        let p2 = p_m_expand(2).unwrap();
        // x_2 x_1 -> 1 + 3, x_1^2 -> 2
        assert_eq!(p2.terms, BTreeMap::from([(4, 1), (2, 2)]));
        let p3 = p_m_expand(3).unwrap();
        let want = BTreeMap::from([(1 + 3 + 9, 1), (2 + 9, 2), (1 + 6, 2), (2 + 3, 2)]);
        assert_eq!(p3.terms, want);
        assert_eq!(p3.raw_terms, 5);
    }

    #[test]
    fn gamma_sequence() {
        let g: Vec<u64> = (1..=5).map(gamma_m).collect();
        assert_eq!(g, vec![1, 2, 5, 12, 29]);
        assert_eq!(gamma_m(12), 13860);
    }

    #[test]
    fn expansion_size_limit() {
        assert!(matches!(p_m_expand(15), Err(Error::Size(_))));
    }

    #[test]
    fn small_bounds_rows() {
        let rows = bounds_check(2..=3).unwrap();
        assert_eq!((rows[0].degree_last, rows[0].max_degree_other, rows[0].max_coefficient), (1, 2, 2));
        assert_eq!(rows[1].max_coefficient, 2);
        assert!(rows.iter().all(|r| r.ok));
    }

    #[test]
    fn one_point_integral_has_closed_form() {
        let (h, t) = (0.25, 1.5);
        let est = simplex_integral(1, h, t, 20_000, 3).unwrap().estimate;
        let exact = t.powf(1.0 - 2.0 * h) / (1.0 - 2.0 * h);
        assert!((est.mean - exact).abs() < 0.01 * exact);
    }
}
