//! Python bindings for `fricobs`.
//!
//! Plain numbers go in and out wherever possible; structured inputs
//! (references, scenarios) are passed as the same JSON used by scenario files.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fricobs::cli;
use fricobs::controller::{self, ControllerGains, ReferenceGenerator};
use fricobs::engine;
use fricobs::excitation::{self, RegressorSeries};
use fricobs::models;
use fricobs::observer::{self, ErrorVector, ObserverGains, ObserverState};
use fricobs::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Diverged { .. } => PyRuntimeError::new_err(e.to_string()),
        Error::Io(_) | Error::Csv(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_err(e: serde_json::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Tanh-friction plant parameters.
#[pyclass(module = "pyfricobs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct FrictionParams {
    inner: models::FrictionParams,
}

#[pymethods]
impl FrictionParams {
    #[new]
    fn new(theta1: f64, theta2: f64, vartheta: f64) -> PyResult<Self> {
        let inner = models::FrictionParams::new(theta1, theta2, vartheta).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn theta1(&self) -> f64 {
        self.inner.theta1
    }

    #[getter]
    fn theta2(&self) -> f64 {
        self.inner.theta2
    }

    #[getter]
    fn vartheta(&self) -> f64 {
        self.inner.vartheta
    }

    /// Friction force at velocity `x2`.
    fn force(&self, x2: f64) -> f64 {
        self.inner.force(x2)
    }

    /// `(dx1, dx2)` of the mechanical plant.
    fn rhs(&self, x1: f64, x2: f64, u: f64) -> (f64, f64) {
        let d = models::mech_rhs(models::MechState { x1, x2 }, &self.inner, u);
        (d.x1, d.x2)
    }

    fn __repr__(&self) -> String {
        format!(
            "FrictionParams(theta1={}, theta2={}, vartheta={})",
            self.inner.theta1, self.inner.theta2, self.inner.vartheta
        )
    }
}

/// LuGre friction parameters.
#[pyclass(module = "pyfricobs", frozen, skip_from_py_object)]
#[derive(Clone)]
struct LuGreParams {
    inner: models::LuGreParams,
}

#[pymethods]
impl LuGreParams {
    #[new]
    fn new(sigma0: f64, sigma1: f64, sigma2: f64, fc: f64, fs: f64, vs: f64) -> PyResult<Self> {
        let inner = models::LuGreParams::new(sigma0, sigma1, sigma2, fc, fs, vs).map_err(py_err)?;
        Ok(Self { inner })
    }

    /// The benchmark coefficient set used in the chirp and step-plus-ramp studies.
    #[staticmethod]
    fn benchmark() -> Self {
        Self { inner: models::LuGreParams::benchmark() }
    }

    fn stribeck(&self, v: f64) -> f64 {
        self.inner.stribeck(v)
    }

    /// `(dx1, dx2, dz)`.
    fn rhs(&self, x1: f64, x2: f64, z: f64, u: f64) -> (f64, f64, f64) {
        let d = models::lugre_rhs(models::LuGreState { x1, x2, z }, &self.inner, u);
        (d.x1, d.x2, d.z)
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "LuGreParams(sigma0={}, sigma1={}, sigma2={}, fc={}, fs={}, vs={})",
            p.sigma0, p.sigma1, p.sigma2, p.fc, p.fs, p.vs
        )
    }
}

/// Numerically stable `ln cosh(y)`.
#[pyfunction]
fn log_cosh(y: f64) -> f64 {
    observer::log_cosh(y)
}

fn gains(k1: f64, vartheta: f64) -> PyResult<ObserverGains> {
    ObserverGains::new(k1, vartheta).map_err(py_err)
}

/// `(x2hat, theta1hat, theta2hat)` from the integral states and position.
#[pyfunction]
fn observer_output(x2i: f64, theta1i: f64, theta2i: f64, x1: f64, k1: f64, vartheta: f64) -> PyResult<(f64, f64, f64)> {
    let os = ObserverState { x2i, theta1i, theta2i, x3hat: None };
    let out = observer::observer_output(&os, x1, &gains(k1, vartheta)?);
    Ok((out.x2hat, out.theta1hat, out.theta2hat))
}

/// `(dx2I, dtheta1I, dtheta2I)` for the mechanical plant.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn observer_rhs(x2i: f64, theta1i: f64, theta2i: f64, x1: f64, u: f64, k1: f64, vartheta: f64) -> PyResult<(f64, f64, f64)> {
    let os = ObserverState { x2i, theta1i, theta2i, x3hat: None };
    let d = observer::observer_rhs(&os, x1, u, &gains(k1, vartheta)?);
    Ok((d.x2i, d.theta1i, d.theta2i))
}

/// Observer Lyapunov function from the error triple.
#[pyfunction]
fn lyapunov_h(x2tilde: f64, theta1tilde: f64, theta2tilde: f64, vartheta: f64) -> f64 {
    let e = ErrorVector { x2tilde, theta1tilde, theta2tilde, x3tilde: None };
    observer::lyapunov_h(&e, vartheta)
}

/// Hydro Lyapunov function: `H + alpha1_lyap·x3tilde²/2`.
#[pyfunction]
fn lyapunov_u(x2tilde: f64, theta1tilde: f64, theta2tilde: f64, x3tilde: f64, vartheta: f64, alpha1_lyap: f64) -> PyResult<f64> {
    let e = ErrorVector { x2tilde, theta1tilde, theta2tilde, x3tilde: Some(x3tilde) };
    observer::lyapunov_u(&e, vartheta, alpha1_lyap).map_err(py_err)
}

/// Smallest certified observer gain for the hydro-mechanical plant.
#[pyfunction]
fn k1_min(theta2_upper: f64, vartheta: f64, a1: f64, a2: f64, a3: f64, alpha1_lyap: f64) -> PyResult<f64> {
    // the certificate does not depend on the friction values themselves
    let friction = models::FrictionParams::new(1.0, 1.0, vartheta).map_err(py_err)?;
    let p = models::HydroParams::new(a1, a2, a3, friction).map_err(py_err)?;
    observer::k1_min(theta2_upper, vartheta, &p, alpha1_lyap).map_err(py_err)
}

fn reference_from_json(spec: &str) -> PyResult<ReferenceGenerator> {
    let r: ReferenceGenerator = serde_json::from_str(spec).map_err(json_err)?;
    r.validate().map_err(py_err)?;
    Ok(r)
}

/// `(r, dr, ddr)` of a reference given as scenario JSON, e.g. `{"kind": "chirp"}`.
#[pyfunction]
fn sample_reference(spec: &str, t: f64) -> PyResult<(f64, f64, f64)> {
    let s = reference_from_json(spec)?.sample(t);
    Ok((s.r, s.dr, s.ddr))
}

/// Certainty-equivalent tracking control.
#[pyfunction]
#[pyo3(signature = (x2hat, theta1hat, theta2hat, x1, r, dr, ddr, alpha1=100.0, alpha2=100.0, vartheta=100.0))]
#[allow(clippy::too_many_arguments)]
fn control(
    x2hat: f64,
    theta1hat: f64,
    theta2hat: f64,
    x1: f64,
    r: f64,
    dr: f64,
    ddr: f64,
    alpha1: f64,
    alpha2: f64,
    vartheta: f64,
) -> PyResult<f64> {
    let out = observer::ObserverOutput { x2hat, theta1hat, theta2hat, gamma1_lower: 0.0 };
    let g = ControllerGains::new(alpha1, alpha2).map_err(py_err)?;
    let reference = controller::ReferenceSample { r, dr, ddr };
    Ok(controller::control(&out, x1, &reference, &g, vartheta))
}

/// Validates a scenario document and returns it normalized (defaults filled in).
#[pyfunction]
fn parse_scenario(text: &str) -> PyResult<String> {
    Ok(cli::parse_scenario(text.as_bytes()).map_err(py_err)?.to_json())
}

/// Simulates one run of a scenario in memory.
///
/// Returns a dict with `columns`, `data` (column name → list), `k1` and
/// `diverged_at` (None unless the integration blew up).
#[pyfunction]
#[pyo3(signature = (text, run_index=0))]
fn simulate_scenario<'py>(py: Python<'py>, text: &str, run_index: usize) -> PyResult<Bound<'py, PyDict>> {
    let scenario = cli::parse_scenario(text.as_bytes()).map_err(py_err)?;
    let runs = scenario.runs().map_err(py_err)?;
    let spec = runs.get(run_index).ok_or_else(|| {
        PyValueError::new_err(format!("run_index {run_index} out of range (scenario has {} runs)", runs.len()))
    })?;
    let log = py
        .detach(|| engine::run(&spec.system, &spec.config, &spec.init))
        .map_err(py_err)?;
    let data = PyDict::new(py);
    for (name, col) in log.columns.iter().zip(&log.data) {
        data.set_item(name, col.clone())?;
    }
    let out = PyDict::new(py);
    out.set_item("columns", log.columns.clone())?;
    out.set_item("data", data)?;
    out.set_item("k1", spec.k1)?;
    out.set_item("diverged_at", log.diverged_at)?;
    Ok(out)
}

/// Runs a scenario to disk and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (text, out_dir=None, jobs=None))]
fn run_scenario(py: Python<'_>, text: &str, out_dir: Option<std::path::PathBuf>, jobs: Option<usize>) -> PyResult<String> {
    let scenario = cli::parse_scenario(text.as_bytes()).map_err(py_err)?;
    let summary = py
        .detach(|| cli::run(&scenario, out_dir.as_deref(), jobs))
        .map_err(py_err)?;
    Ok(summary.manifest_path.display().to_string())
}

fn series(times: Vec<f64>, phi: Vec<[f64; 2]>) -> PyResult<RegressorSeries> {
    RegressorSeries::new(times, phi).map_err(py_err)
}

/// `(gram, lambda_min)` of the regressor over `[t0, t1]`.
#[pyfunction]
fn gram_over_window(times: Vec<f64>, phi: Vec<[f64; 2]>, t0: f64, t1: f64) -> PyResult<([[f64; 2]; 2], f64)> {
    let w = excitation::gram_over_window(&series(times, phi)?, t0, t1).map_err(py_err)?;
    Ok((w.gram, w.lambda_min))
}

/// Sliding-window persistence-of-excitation check.
///
/// Returns `(satisfied, worst_lambda_min, worst_t_start, windows_checked)`.
#[pyfunction]
#[pyo3(signature = (times, phi, width, mu, stride=None))]
fn check_pe(times: Vec<f64>, phi: Vec<[f64; 2]>, width: f64, mu: f64, stride: Option<f64>) -> PyResult<(bool, f64, f64, usize)> {
    let v = excitation::check_pe(&series(times, phi)?, width, mu, stride).map_err(py_err)?;
    Ok((v.satisfied, v.worst.lambda_min, v.worst.t_start, v.windows_checked))
}

#[pymodule]
fn pyfricobs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<FrictionParams>()?;
    m.add_class::<LuGreParams>()?;
    m.add_function(wrap_pyfunction!(log_cosh, m)?)?;
    m.add_function(wrap_pyfunction!(observer_output, m)?)?;
    m.add_function(wrap_pyfunction!(observer_rhs, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_h, m)?)?;
    m.add_function(wrap_pyfunction!(lyapunov_u, m)?)?;
    m.add_function(wrap_pyfunction!(k1_min, m)?)?;
    m.add_function(wrap_pyfunction!(sample_reference, m)?)?;
    m.add_function(wrap_pyfunction!(control, m)?)?;
    m.add_function(wrap_pyfunction!(parse_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(gram_over_window, m)?)?;
    m.add_function(wrap_pyfunction!(check_pe, m)?)?;
    Ok(())
}
