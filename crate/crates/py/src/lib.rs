//! Python bindings. Structured values cross the boundary as plain dicts and
//! lists, using the same field names as the JSON files written by the CLI.

use igo_core::bifurcation::{a3_crossings, sweep_a3 as core_sweep_a3, SweepBase};
use igo_core::design::DesignOptions;
use igo_core::{audit, cycle, design as core_design, sim, CycleSpec, IgoModel, PlantParams, StateVec};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn from_py<T: DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = PyModule::import(py, "json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    PyModule::import(py, "json")?.call_method1("loads", (text,))
}

fn domain(e: igo_core::IgoError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Pre-impulse state X of the 1-cycle with the prescribed weight and period.
#[pyfunction]
fn fixed_point<'py>(
    py: Python<'py>,
    plant: &Bound<'py, PyAny>,
    spec: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let plant: PlantParams = from_py(py, plant)?;
    let spec: CycleSpec = from_py(py, spec)?;
    to_py(py, &cycle::fixed_point(&plant, &spec).map_err(domain)?)
}

/// One application of the impulse-to-impulse map.
#[pyfunction]
fn map_q<'py>(py: Python<'py>, model: &Bound<'py, PyAny>, x: [f64; 3]) -> PyResult<Bound<'py, PyAny>> {
    let model: IgoModel = from_py(py, model)?;
    to_py(py, &cycle::map_q(&model, &StateVec::from(x)).map_err(domain)?)
}

/// The 1-cycle realized by a model.
#[pyfunction]
fn solve_one_cycle<'py>(py: Python<'py>, model: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let model: IgoModel = from_py(py, model)?;
    to_py(py, &cycle::solve_one_cycle(&model).map_err(domain)?)
}

/// Full controller design; `options` uses the keys of the CLI design config.
#[pyfunction]
#[pyo3(signature = (plant, spec, options=None))]
fn design<'py>(
    py: Python<'py>,
    plant: &Bound<'py, PyAny>,
    spec: &Bound<'py, PyAny>,
    options: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    let plant: PlantParams = from_py(py, plant)?;
    let spec: CycleSpec = from_py(py, spec)?;
    let opts: DesignOptions = match options {
        Some(o) => from_py(py, o)?,
        None => DesignOptions::default(),
    };
    to_py(py, &core_design::design(&plant, &spec, &opts).map_err(domain)?)
}

/// Impulse events from `x0`.
#[pyfunction]
fn simulate<'py>(
    py: Python<'py>,
    model: &Bound<'py, PyAny>,
    x0: [f64; 3],
    n_impulses: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let model: IgoModel = from_py(py, model)?;
    to_py(py, &sim::simulate_impulses(&model, &StateVec::from(x0), n_impulses).map_err(domain)?)
}

/// Sweep of a3 with the gain h recalibrated per point; returns records and refined crossings.
#[pyfunction]
fn sweep_a3<'py>(
    py: Python<'py>,
    base: &Bound<'py, PyAny>,
    spec: &Bound<'py, PyAny>,
    low: f64,
    high: f64,
    points: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let base: SweepBase = from_py(py, base)?;
    let spec: CycleSpec = from_py(py, spec)?;
    let records = core_sweep_a3(&base, &spec, (low, high), points);
    let crossings = a3_crossings(&base, &spec, &records).map_err(domain)?;
    to_py(py, &serde_json::json!({ "records": records, "crossings": crossings }))
}

/// Consistency audit of the reference example.
#[pyfunction]
fn audit_reference<'py>(py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &audit::audit_reference_example().map_err(domain)?)
}

#[pymodule]
fn igo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(map_q, m)?)?;
    m.add_function(wrap_pyfunction!(solve_one_cycle, m)?)?;
    m.add_function(wrap_pyfunction!(design, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_a3, m)?)?;
    m.add_function(wrap_pyfunction!(audit_reference, m)?)?;
    Ok(())
}
