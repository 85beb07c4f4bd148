//! Python bindings: models, growth rates, limits, hypothesis checks, sweeps
//! and the DIG/DID scans. Structured reports come back as plain dicts.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use patchgrowth::catalog::{catalog, find, Bindings};
use patchgrowth::digdid::{did_construct, did_scan, dig_scan, ScanOptions};
use patchgrowth::limits::{limit_report, sigma_chi, LimitOptions};
use patchgrowth::modelfile::{parse_model, to_toml, ModelMetadata};
use patchgrowth::monodromy::{growth_rate, trajectory_lyapunov};
use patchgrowth::simplex::{check_h2, check_h3, check_h4, CheckConfig};
use patchgrowth::sweep::{sweep, GridAxis, SweepGrid};
use patchgrowth::{Breakpoint, Error, ModelParameters, PiecewiseMatrixPath, SquareMatrix};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::ModelFile(_)
        | Error::InvalidMatrix(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidPath(_)
        | Error::InvalidModel(_)
        | Error::InvalidParameters(_)
        | Error::Domain(_)
        | Error::UnknownEntry(_)
        | Error::Reducible => PyValueError::new_err(e.to_string()),
        other => PyArithmeticError::new_err(other.to_string()),
    }
}

/// Serializes through JSON into Python builtins.
fn to_object<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn breakpoint(v: &Bound<'_, PyAny>) -> PyResult<Breakpoint> {
    if let Ok(s) = v.extract::<String>() {
        return s.parse::<Breakpoint>().map_err(to_py);
    }
    let x: f64 = v.extract()?;
    Ok(if x == 0.0 { Breakpoint::zero() } else { Breakpoint::Float(x) })
}

fn breakpoints(v: &[Bound<'_, PyAny>]) -> PyResult<Vec<Breakpoint>> {
    v.iter().map(breakpoint).collect()
}

fn grid(m: Vec<f64>, t: Vec<f64>) -> PyResult<SweepGrid> {
    SweepGrid::new(GridAxis(m), GridAxis(t)).map_err(to_py)
}

fn params(m: f64, t: f64) -> PyResult<ModelParameters> {
    ModelParameters::new(m, t).map_err(to_py)
}

/// `(m, T, lambda, mu, decoupled)`.
type SweepRow = (f64, f64, f64, f64, bool);
/// `(t, x, ln total)`.
type Sample = (f64, Vec<f64>, f64);

/// Piecewise-constant patch model `dx/dt = (R(t/T) + m L(t/T)) x`.
#[pyclass(name = "PatchModel", module = "patchgrowth", frozen)]
pub struct PyPatchModel {
    inner: patchgrowth::PatchModel,
}

#[pyclass(name = "GrowthRate", module = "patchgrowth", frozen, get_all)]
pub struct PyGrowthRate {
    /// `Λ = ln μ / T`.
    lam: f64,
    mu: f64,
    log_mu: f64,
    pi: Vec<f64>,
    period: f64,
    decoupled: bool,
}

#[pymethods]
impl PyGrowthRate {
    fn __repr__(&self) -> String {
        format!(
            "GrowthRate(lam={}, mu={}, pi={:?}, decoupled={})",
            self.lam, self.mu, self.pi, self.decoupled
        )
    }
}

#[pymethods]
impl PyPatchModel {
    /// `breakpoints` are floats or "p/q" strings starting at 0; one rate
    /// vector and one migration matrix per segment.
    #[new]
    fn new(breakpoints_: Vec<Bound<'_, PyAny>>, rates: Vec<Vec<f64>>, migration: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let starts = breakpoints(&breakpoints_)?;
        let mats = migration
            .iter()
            .map(|rows| SquareMatrix::from_rows(rows))
            .collect::<patchgrowth::Result<Vec<_>>>()
            .map_err(to_py)?;
        let inner = patchgrowth::PatchModel::piecewise_constant(starts, rates, mats).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: parse_model(text).map_err(to_py)?.model,
        })
    }

    /// Built-in example model, with optional parameter overrides.
    #[staticmethod]
    #[pyo3(signature = (name, params = None))]
    fn catalog(name: &str, params: Option<Bound<'_, PyDict>>) -> PyResult<Self> {
        let entry = find(name).map_err(to_py)?;
        let mut b = Bindings::new();
        if let Some(d) = params {
            for (k, v) in d.iter() {
                b.set(&k.extract::<String>()?, v.extract()?);
            }
        }
        let b = entry.bind(&b).map_err(to_py)?;
        Ok(Self {
            inner: entry.model(&b).map_err(to_py)?,
        })
    }

    #[pyo3(signature = (name = None))]
    fn to_toml(&self, name: Option<String>) -> PyResult<String> {
        let meta = ModelMetadata {
            name,
            description: None,
        };
        to_toml(&self.inner, &meta).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn mean_growth(&self) -> Vec<f64> {
        self.inner.mean_growth()
    }

    fn satisfies_h2(&self) -> bool {
        self.inner.satisfies_h2()
    }

    /// `(σ, χ)`: time averages of the smallest and largest growth rate.
    fn sigma_chi(&self) -> PyResult<(f64, f64)> {
        sigma_chi(&self.inner).map_err(to_py)
    }

    #[pyo3(name = "growth_rate")]
    fn growth_rate_py(&self, py: Python<'_>, m: f64, period: f64) -> PyResult<PyGrowthRate> {
        let p = params(m, period)?;
        let r = py.detach(|| growth_rate(&self.inner, &p)).map_err(to_py)?;
        Ok(PyGrowthRate {
            lam: r.lambda,
            mu: r.mu,
            log_mu: r.log_mu,
            pi: r.pi,
            period: r.period,
            decoupled: r.decoupled,
        })
    }

    /// Monodromy matrix `X(T)` as a list of rows.
    fn monodromy(&self, py: Python<'_>, m: f64, period: f64) -> PyResult<Vec<Vec<f64>>> {
        let p = params(m, period)?;
        let r = py.detach(|| growth_rate(&self.inner, &p)).map_err(to_py)?;
        Ok(r.monodromy().map_err(to_py)?.rows())
    }

    /// Every asymptotic limit at `m`, with hypothesis verdicts.
    #[pyo3(signature = (m, force = false, probe_m = 1e-2, seed = None))]
    fn limits<'py>(&self, py: Python<'py>, m: f64, force: bool, probe_m: f64, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let mut opts = LimitOptions {
            force,
            probe_m,
            ..LimitOptions::default()
        };
        if let Some(s) = seed {
            opts.check.seed = s;
        }
        let r = py.detach(|| limit_report(&self.inner, m, &opts)).map_err(to_py)?;
        to_object(py, &r)
    }

    /// H2, H3 (at `m`) and H4 reports keyed by hypothesis.
    #[pyo3(signature = (m, seed = None))]
    fn check<'py>(&self, py: Python<'py>, m: f64, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
        let mut cfg = CheckConfig::default();
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let (h2, h3, h4) = py
            .detach(|| -> patchgrowth::Result<_> {
                Ok((check_h2(&self.inner), check_h3(&self.inner, m, &cfg)?, check_h4(&self.inner, &cfg)))
            })
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("H2", to_object(py, &h2)?)?;
        d.set_item("H3", to_object(py, &h3)?)?;
        d.set_item("H4", to_object(py, &h4)?)?;
        Ok(d.into_any())
    }

    /// Rows `(m, T, lambda, mu, decoupled)` with `m` as the outer index.
    #[pyo3(signature = (m_values, t_values, jobs = None))]
    fn sweep(&self, py: Python<'_>, m_values: Vec<f64>, t_values: Vec<f64>, jobs: Option<usize>) -> PyResult<Vec<SweepRow>> {
        let g = grid(m_values, t_values)?;
        let rows = py.detach(|| sweep(&self.inner, &g, jobs)).map_err(to_py)?;
        Ok(rows.into_iter().map(|r| (r.m, r.t, r.lambda, r.mu, r.decoupled)).collect())
    }

    #[pyo3(signature = (m_values, t_values, probe_m = 1e-2, jobs = None))]
    fn dig_scan<'py>(&self, py: Python<'py>, m_values: Vec<f64>, t_values: Vec<f64>, probe_m: f64, jobs: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let g = grid(m_values, t_values)?;
        let opts = ScanOptions {
            probe_m,
            jobs,
            ..ScanOptions::default()
        };
        let r = py.detach(|| dig_scan(&self.inner, &g, &opts)).map_err(to_py)?;
        to_object(py, &r)
    }

    /// DID scan of this model's own migration.
    #[pyo3(signature = (m_values, t_values, jobs = None))]
    fn did_scan<'py>(&self, py: Python<'py>, m_values: Vec<f64>, t_values: Vec<f64>, jobs: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
        let g = grid(m_values, t_values)?;
        let opts = ScanOptions {
            jobs,
            ..ScanOptions::default()
        };
        let r = py
            .detach(|| did_scan(self.inner.growth(), Some(self.inner.migration()), &g, &opts))
            .map_err(to_py)?;
        to_object(py, &r.result)
    }

    /// Per-period samples `(t, x normalized to sum 1, ln total)` and the
    /// last-period growth rate.
    #[pyo3(signature = (m, period, x0 = None, periods = 100))]
    fn trajectory(&self, py: Python<'_>, m: f64, period: f64, x0: Option<Vec<f64>>, periods: usize) -> PyResult<(Vec<Sample>, f64)> {
        let p = params(m, period)?;
        let x0 = x0.unwrap_or_else(|| vec![1.0; self.inner.n()]);
        let est = py
            .detach(|| trajectory_lyapunov(&self.inner, &p, &x0, periods))
            .map_err(to_py)?;
        let samples = est.samples.into_iter().map(|s| (s.t, s.x, s.log_norm)).collect();
        Ok((samples, est.shared))
    }

    fn __repr__(&self) -> String {
        format!(
            "PatchModel(n={}, segments={})",
            self.inner.n(),
            self.inner.combined().breakpoints().len()
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

/// Migration toward the patch with the lowest growth rate for a
/// piecewise-constant growth schedule.
#[pyfunction]
#[pyo3(signature = (breakpoints_, rates, epsilon = 1e-3))]
fn did_construct_py(breakpoints_: Vec<Bound<'_, PyAny>>, rates: Vec<Vec<f64>>, epsilon: f64) -> PyResult<(PyPatchModel, f64)> {
    let starts = breakpoints(&breakpoints_)?;
    let diag = rates
        .iter()
        .map(|r| SquareMatrix::diagonal(r))
        .collect::<patchgrowth::Result<Vec<_>>>()
        .map_err(to_py)?;
    let growth = PiecewiseMatrixPath::piecewise_constant(starts, diag).map_err(to_py)?;
    let c = did_construct(&growth, epsilon).map_err(to_py)?;
    Ok((PyPatchModel { inner: c.model }, c.epsilon_correction))
}

#[pyfunction]
fn catalog_names() -> Vec<&'static str> {
    catalog().iter().map(|e| e.name).collect()
}

#[pymodule]
#[pyo3(name = "patchgrowth")]
fn patchgrowth_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPatchModel>()?;
    m.add_class::<PyGrowthRate>()?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    let f = wrap_pyfunction!(did_construct_py, m)?;
    m.add("did_construct", f)?;
    Ok(())
}
