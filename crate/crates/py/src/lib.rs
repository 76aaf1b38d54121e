//! Python bindings: scenarios go in as JSON text, reports come back as Python objects.

use degenctl::cli::{cmd_validate, cmd_verify, compute_control, ControlMode, Scenario, VERIFY_CHECKS};
use degenctl::model::Field;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::path::PathBuf;

fn parse(scenario: &str, base_dir: Option<PathBuf>) -> PyResult<Scenario> {
    let mut sc = Scenario::parse(scenario).map_err(|e| PyValueError::new_err(e.to_string()))?;
    if let Some(dir) = base_dir {
        sc.base_dir = dir;
    }
    Ok(sc)
}

fn to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObject> {
    let json = py.import_bound("json")?;
    Ok(json.call_method1("loads", (value.to_string(),))?.unbind())
}

fn rows(field: &Field) -> Vec<Vec<f64>> {
    field.rows().map(<[f64]>::to_vec).collect()
}

fn mode(name: &str) -> PyResult<ControlMode> {
    match name {
        "default" => Ok(ControlMode::Default),
        "two_phase" => Ok(ControlMode::TwoPhase),
        "shortcut" => Ok(ControlMode::Shortcut),
        other => Err(PyValueError::new_err(format!("unknown mode {other:?}; expected default, two_phase or shortcut"))),
    }
}

/// Validation report as a dict; `report["passed"]` tells whether every check held.
#[pyfunction]
#[pyo3(signature = (scenario, base_dir=None))]
fn validate(py: Python<'_>, scenario: &str, base_dir: Option<PathBuf>) -> PyResult<PyObject> {
    let sc = parse(scenario, base_dir)?;
    let (_, report) = py.allow_threads(|| cmd_validate(&sc));
    to_py(py, &report)
}

/// Computes a null control. Returns a dict with `summary`, `control` and `state`, the fields as
/// lists of time levels.
#[pyfunction]
#[pyo3(signature = (scenario, mode="default", base_dir=None))]
fn control(py: Python<'_>, scenario: &str, mode: &str, base_dir: Option<PathBuf>) -> PyResult<PyObject> {
    let sc = parse(scenario, base_dir)?;
    let m = self::mode(mode)?;
    let out = py.allow_threads(|| compute_control(&sc, m)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let dict = PyDict::new_bound(py);
    dict.set_item("summary", to_py(py, &out.summary)?)?;
    dict.set_item("control", rows(&out.control))?;
    dict.set_item("state", rows(&out.state))?;
    dict.set_item("passed", out.passed)?;
    Ok(dict.into_any().unbind())
}

/// Runs the named checks, writing `<check>.json` and `<check>.csv` into `out_dir`.
#[pyfunction]
#[pyo3(signature = (scenario, checks, out_dir, base_dir=None))]
fn verify(py: Python<'_>, scenario: &str, checks: Vec<String>, out_dir: PathBuf, base_dir: Option<PathBuf>) -> PyResult<PyObject> {
    let sc = parse(scenario, base_dir)?;
    if let Some(bad) = checks.iter().find(|c| !VERIFY_CHECKS.contains(&c.as_str())) {
        return Err(PyValueError::new_err(format!("unknown check {bad:?}")));
    }
    let (_, status) = py
        .allow_threads(|| cmd_verify(&sc, &checks, None, &out_dir))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &status)
}

#[pymodule]
fn degenctl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(control, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add("CHECKS", VERIFY_CHECKS.to_vec())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
