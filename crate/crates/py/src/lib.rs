//! Python module `roughflow`.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use roughflow::fbm::{FbmConfig, FbmSampler, Sampler};
use roughflow::flow::{composition_defect, solve_flow, DriftSpec};
use roughflow::permanent::{self, TridiagSpec};
use roughflow::transport::{weak_residual, InitialDatum};
use roughflow::{chen_defect, geometric_lift, RoughPath, SmoothFn, TimeGrid};

fn err(e: roughflow::Error) -> PyErr {
    match e {
        roughflow::Error::Numerical(_) | roughflow::Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn drift_from_json(spec: &str) -> PyResult<DriftSpec> {
    let d: DriftSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
    d.validate().map_err(err)?;
    Ok(d)
}

fn grid(horizon: f64, steps: usize) -> PyResult<TimeGrid> {
    TimeGrid::new(horizon, steps).map_err(err)
}

/// fBm paths on `steps + 1` uniform points of `[0, horizon]`.
#[pyfunction]
#[pyo3(signature = (hurst, horizon, steps, n_paths, seed, sampler = "circulant"))]
pub fn sample_fbm(hurst: f64, horizon: f64, steps: usize, n_paths: usize, seed: u64, sampler: &str) -> PyResult<Vec<Vec<f64>>> {
    let kind = match sampler {
        "circulant" => Sampler::Circulant,
        "covariance-factor" => Sampler::CovarianceFactor,
        other => return Err(PyValueError::new_err(format!("unknown sampler {other:?}"))),
    };
    let cfg = FbmConfig::new(hurst, grid(horizon, steps)?, seed, kind).map_err(err)?;
    let s = FbmSampler::new(cfg).map_err(err)?;
    Ok(s.sample_batch(n_paths).into_iter().map(|p| p.values).collect())
}

/// Geometric lift of a sampled scalar path.
#[pyclass(name = "RoughPath", frozen)]
pub struct PyRoughPath {
    inner: Arc<RoughPath>,
}

#[pymethods]
impl PyRoughPath {
    #[new]
    pub fn new(path: Vec<f64>, horizon: f64, gamma: f64) -> PyResult<Self> {
        if path.len() < 2 {
            return Err(PyValueError::new_err("path needs at least two points"));
        }
        let g = grid(horizon, path.len() - 1)?;
        Ok(Self { inner: Arc::new(geometric_lift(&g, &path, gamma).map_err(err)?) })
    }

    #[getter]
    pub fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    pub fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    /// `X^(n)_{ij}`.
    pub fn get(&self, n: usize, i: usize, j: usize) -> PyResult<f64> {
        let pts = self.inner.grid().len();
        if n > self.inner.p() || i >= j || j >= pts {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(n, i, j))
    }

    pub fn chen_defect(&self) -> f64 {
        chen_defect(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("RoughPath(points={}, p={}, gamma={})", self.inner.grid().len(), self.inner.p(), self.inner.gamma())
    }
}

/// Flow `φ_t(x)` for each starting node; `drift` is a JSON drift spec such as `{"kind": "cos", "amp": 1.0}`.
#[pyfunction]
pub fn flow(drift: &str, driver: Vec<f64>, horizon: f64, nodes: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let d = drift_from_json(drift)?;
    let g = grid(horizon, driver.len().saturating_sub(1))?;
    Ok(solve_flow(&d, &g, &driver, &nodes).map_err(err)?.phi)
}

/// `max |ψ(φ(x)) - x|` over the nodes.
#[pyfunction]
pub fn inverse_defect(drift: &str, driver: Vec<f64>, horizon: f64, nodes: Vec<f64>) -> PyResult<f64> {
    let d = drift_from_json(drift)?;
    let g = grid(horizon, driver.len().saturating_sub(1))?;
    composition_defect(&d, &g, &driver, &nodes).map_err(err)
}

/// Weak residual of the transport equation for a Gaussian datum and a bump test function.
#[pyfunction]
#[pyo3(signature = (drift, driver, horizon, gamma, eta_center = 0.0, eta_radius = 1.0, width = 0.5))]
pub fn transport_residual(
    drift: &str,
    driver: Vec<f64>,
    horizon: f64,
    gamma: f64,
    eta_center: f64,
    eta_radius: f64,
    width: f64,
) -> PyResult<(f64, [f64; 4])> {
    let d = drift_from_json(drift)?;
    let g = grid(horizon, driver.len().saturating_sub(1))?;
    let datum = InitialDatum::gaussian(0.0, width);
    let eta = SmoothFn::bump(eta_center, eta_radius);
    let r = weak_residual(&datum, &d, &g, &driver, gamma, &eta, (-10.0 * width - 4.0, 10.0 * width + 4.0)).map_err(err)?;
    Ok((r.residual, [r.t1, r.t2, r.t3, r.t4]))
}

/// `f_m` by recursion for times `s` and Hurst parameter `hurst`.
#[pyfunction]
pub fn f_m(s: Vec<f64>, hurst: f64) -> PyResult<f64> {
    Ok(permanent::f_m_recursive(&TridiagSpec::new(s, hurst).map_err(err)?))
}

#[pyfunction]
pub fn brute_permanent(matrix: Vec<Vec<f64>>) -> PyResult<f64> {
    permanent::brute_permanent(&matrix).map_err(err)
}

#[pyfunction]
pub fn gamma_m(m: usize) -> u64 {
    permanent::gamma_m(m)
}

/// Monomials of `p_m` as `{exponent digits: coefficient}`.
#[pyfunction]
pub fn p_m(m: usize) -> PyResult<Vec<(String, u64)>> {
    let p = permanent::p_m_expand(m).map_err(err)?;
    Ok(p.terms
        .iter()
        .map(|(&k, &c)| (p.exponents(k).iter().map(|d| char::from(b'0' + d)).collect(), c))
        .collect())
}

#[pymodule]
#[pyo3(name = "roughflow")]
fn roughflow_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRoughPath>()?;
    m.add_function(wrap_pyfunction!(sample_fbm, m)?)?;
    m.add_function(wrap_pyfunction!(flow, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_defect, m)?)?;
    m.add_function(wrap_pyfunction!(transport_residual, m)?)?;
    m.add_function(wrap_pyfunction!(f_m, m)?)?;
    m.add_function(wrap_pyfunction!(brute_permanent, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_m, m)?)?;
    m.add_function(wrap_pyfunction!(p_m, m)?)?;
    Ok(())
}
