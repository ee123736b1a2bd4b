//! Fractional Brownian motion: covariance, samplers, non-determinism probes
//! and the discrete Girsanov weight.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::grid::TimeGrid;

/// `R_H(t, s) = (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn covariance(t: f64, s: f64, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    0.5 * (t.powf(h2) + s.powf(h2) - (t - s).abs().powf(h2))
}

/// Autocovariance of unit-step fractional Gaussian noise at lag `k`.
pub fn fgn_autocovariance(k: usize, hurst: f64) -> f64 {
    let h2 = 2.0 * hurst;
    let k = k as f64;
    0.5 * ((k + 1.0).powf(h2) + (k - 1.0).abs().powf(h2) - 2.0 * k.powf(h2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    #[default]
    CovarianceFactor,
    Circulant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmConfig {
    pub hurst: f64,
    pub grid: TimeGrid,
    pub seed: u64,
    pub sampler: Sampler,
}

impl FbmConfig {
    pub fn new(hurst: f64, grid: TimeGrid, seed: u64, sampler: Sampler) -> Result<Self> {
        if !(hurst > 0.0 && hurst <= 0.5) {
            return param(format!("Hurst parameter must lie in (0, 1/2], got {hurst}"));
        }
        Ok(Self { hurst, grid, seed, sampler })
    }
}

/// One sampled path together with the normals that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmSample {
    pub path_id: u64,
    pub values: Vec<f64>,
    pub normals: Vec<f64>,
}

enum Engine {
    /// Packed rows of the lower Cholesky factor of the increment covariance.
    Factor { rows: Vec<f64> },
    Circulant { scale: Vec<f64>, fft: Arc<dyn Fft<f64>> },
}

/// Prepared sampler; cheap to share between threads.
pub struct FbmSampler {
    cfg: FbmConfig,
    engine: Engine,
    jitter: f64,
}

impl std::fmt::Debug for FbmSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmSampler").field("cfg", &self.cfg).field("jitter", &self.jitter).finish()
    }
}

fn rng_for(seed: u64, path_id: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

impl FbmSampler {
    pub fn new(cfg: FbmConfig) -> Result<Self> {
        let n = cfg.grid.steps();
        let var = cfg.grid.dt().powf(2.0 * cfg.hurst);
        let gam: Vec<f64> = (0..=n).map(|k| fgn_autocovariance(k, cfg.hurst)).collect();
        let (engine, jitter) = match cfg.sampler {
            Sampler::CovarianceFactor => {
                let mut jitter = 0.0;
                let chol = loop {
                    let m = DMatrix::from_fn(n, n, |i, j| {
                        var * gam[i.abs_diff(j)] + if i == j { jitter } else { 0.0 }
                    });
                    if let Some(c) = m.cholesky() {
                        break c;
                    }
                    jitter = if jitter == 0.0 { 1e-14 * var } else { jitter * 10.0 };
                    if jitter > 1e-6 * var {
                        return Err(Error::Numerical("increment covariance is not positive definite".into()));
                    }
                };
                let l = chol.l();
                let mut rows = vec![0.0; row_start(n)];
                for i in 0..n {
                    for j in 0..=i {
                        rows[row_start(i) + j] = l[(i, j)];
                    }
                }
                (Engine::Factor { rows }, jitter)
            }
            Sampler::Circulant => {
                let m = 2 * n;
                let mut c: Vec<Complex64> = (0..m)
                    .map(|k| Complex64::new(gam[if k <= n { k } else { m - k }], 0.0))
                    .collect();
                let fft = FftPlanner::new().plan_fft_forward(m);
                fft.process(&mut c);
                let top = c.iter().map(|z| z.re).fold(0.0, f64::max);
                let mut scale = Vec::with_capacity(m);
                for z in &c {
                    if z.re < -1e-10 * top {
                        return Err(Error::Numerical(format!(
                            "circulant embedding has a negative eigenvalue {}",
                            z.re
                        )));
                    }
                    scale.push((z.re.max(0.0) / m as f64).sqrt());
                }
                (Engine::Circulant { scale, fft }, 0.0)
            }
        };
        Ok(Self { cfg, engine, jitter })
    }

    pub fn config(&self) -> &FbmConfig {
        &self.cfg
    }

    /// Diagonal jitter added to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Entry `(i, j)` of the lower factor, when the covariance-factor sampler is used.
    pub fn factor_entry(&self, i: usize, j: usize) -> Option<f64> {
        match &self.engine {
            Engine::Factor { rows } if j <= i => Some(rows[row_start(i) + j]),
            Engine::Factor { .. } => Some(0.0),
            _ => None,
        }
    }

    pub fn sample(&self, path_id: u64) -> FbmSample {
        let mut rng = rng_for(self.cfg.seed, path_id);
        let n = self.cfg.grid.steps();
        let mut values = vec![0.0; n + 1];
        let normals: Vec<f64>;
        match &self.engine {
            Engine::Factor { rows } => {
                normals = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                for i in 0..n {
                    let row = &rows[row_start(i)..row_start(i) + i + 1];
                    let inc: f64 = row.iter().zip(&normals).map(|(a, z)| a * z).sum();
                    values[i + 1] = values[i] + inc;
                }
            }
            Engine::Circulant { scale, fft } => {
                normals = (0..2 * scale.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                let mut w: Vec<Complex64> = scale
                    .iter()
                    .enumerate()
                    .map(|(k, s)| Complex64::new(s * normals[2 * k], s * normals[2 * k + 1]))
                    .collect();
                fft.process(&mut w);
                let sd = self.cfg.grid.dt().powf(self.cfg.hurst);
                for i in 0..n {
                    values[i + 1] = values[i] + w[i].re * sd;
                }
            }
        }
        FbmSample { path_id, values, normals }
    }

    /// Paths `0..n_paths`, identical regardless of the thread count.
    pub fn sample_batch(&self, n_paths: usize) -> Vec<FbmSample> {
        (0..n_paths as u64).into_par_iter().map(|id| self.sample(id)).collect()
    }
}

pub fn sample_fbm(cfg: FbmConfig, n_paths: usize) -> Result<Vec<FbmSample>> {
    Ok(FbmSampler::new(cfg)?.sample_batch(n_paths))
}

/// Exact variance of `Σ ξ_j (B_{t_{j+1}} - B_{t_j})` and its ratio to `Σ ξ_j^2 (Δt_j)^{2H}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lnd {
    pub variance: f64,
    pub ratio: f64,
}

pub fn lnd_diagnostic(hurst: f64, times: &[f64], coeffs: &[f64]) -> Result<Lnd> {
    if times.len() < 2 || coeffs.len() + 1 != times.len() {
        return param("need m >= 2 times and m - 1 coefficients");
    }
    if times.windows(2).any(|w| w[1] <= w[0]) || times[0] < 0.0 {
        return param("times must be non-negative and strictly increasing");
    }
    let cov = |a: usize, b: usize| {
        let r = |x: f64, y: f64| covariance(x, y, hurst);
        let (t0, t1, s0, s1) = (times[a], times[a + 1], times[b], times[b + 1]);
        r(t1, s1) - r(t1, s0) - r(t0, s1) + r(t0, s0)
    };
    let m = coeffs.len();
    let mut variance = 0.0;
    for a in 0..m {
        for b in 0..m {
            variance += coeffs[a] * coeffs[b] * cov(a, b);
        }
    }
    let denom: f64 = (0..m).map(|j| coeffs[j].powi(2) * (times[j + 1] - times[j]).powf(2.0 * hurst)).sum();
    Ok(Lnd { variance, ratio: variance / denom })
}

/// Girsanov density removing the drift `∫ u dr` from a covariance-factor sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirsanovWeight {
    pub theta: Vec<f64>,
    pub logweight: f64,
}

impl GirsanovWeight {
    pub fn weight(&self) -> f64 {
        self.logweight.exp()
    }
}

/// `θ = L^{-1} ΔU / sqrt(dt)` with `ΔU` the trapezoid increments of `∫ u dr`.
pub fn girsanov_weight(sampler: &FbmSampler, sample: &FbmSample, u: &[f64]) -> Result<GirsanovWeight> {
    let Engine::Factor { rows } = &sampler.engine else {
        return param("Girsanov reweighting needs the covariance-factor sampler");
    };
    let grid = &sampler.cfg.grid;
    let n = grid.steps();
    if u.len() != n + 1 || sample.normals.len() != n {
        return param("drift or sample does not match the grid");
    }
    let dt = grid.dt();
    let mut a = vec![0.0; n];
    for i in 0..n {
        let row = &rows[row_start(i)..row_start(i) + i + 1];
        let rhs = 0.5 * dt * (u[i] + u[i + 1]);
        let acc: f64 = row[..i].iter().zip(&a[..i]).map(|(l, x)| l * x).sum();
        if row[i] == 0.0 {
            return Err(Error::Numerical("singular triangular factor".into()));
        }
        a[i] = (rhs - acc) / row[i];
    }
    let dot: f64 = a.iter().zip(&sample.normals).map(|(x, z)| x * z).sum();
    let sq: f64 = a.iter().map(|x| x * x).sum();
    let root = dt.sqrt();
    Ok(GirsanovWeight { theta: a.iter().map(|x| x / root).collect(), logweight: -dot - 0.5 * sq })
}

/// Empirical `E[B_a B_b]` and its standard error for zero-mean samples.
pub fn empirical_covariance(samples: &[FbmSample], a: usize, b: usize) -> crate::stats::Estimate {
    let prods: Vec<f64> = samples.iter().map(|s| s.values[a] * s.values[b]).collect();
    crate::stats::Estimate::from_samples(&prods)
}

/// Log-log slope of mean absolute increments against the lag.
pub fn estimate_hurst(path: &[f64], lags: &[usize]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = lags
        .iter()
        .map(|&l| {
            let m = path.windows(l + 1).map(|w| (w[l] - w[0]).abs()).sum::<f64>() / (path.len() - l) as f64;
            (l as f64, m)
        })
        .unzip();
    crate::stats::loglog_slope(&x, &y)
}
