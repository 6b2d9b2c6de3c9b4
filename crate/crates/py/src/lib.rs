//! Python bindings: parameter sets, cards, bias solutions, sweeps,
//! measurement data and the staged fit.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use sicfet_core::dataset;
use sicfet_core::extraction;
use sicfet_core::model;
use sicfet_core::sweep::{self, Axis, Scale};
use sicfet_core::SolverOptions;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Model parameter set. Attributes are read and written by name.
#[pyclass(name = "ModelParams", module = "sicfet", skip_from_py_object)]
#[derive(Clone)]
struct PyParams {
    inner: model::ModelParams,
}

#[pymethods]
impl PyParams {
    /// Parameters of a named preset (default: the bundled 1200 V device).
    #[staticmethod]
    #[pyo3(signature = (name = None))]
    fn preset(name: Option<&str>) -> PyResult<Self> {
        let name = name.unwrap_or(sicfet_core::presets::PRESETS[0].0);
        sicfet_core::presets::by_name(name)
            .map(|c| Self { inner: c.params })
            .ok_or_else(|| PyKeyError::new_err(format!("unknown preset {name:?}")))
    }

    #[staticmethod]
    fn names() -> Vec<&'static str> {
        model::PARAMS.iter().map(|p| p.name).collect()
    }

    fn get(&self, name: &str) -> PyResult<f64> {
        self.inner.get(name).ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    fn set(&mut self, name: &str, value: f64) -> PyResult<()> {
        self.inner.set(name, value).map_err(value_err)
    }

    fn to_dict(&self) -> BTreeMap<&'static str, f64> {
        model::PARAMS.iter().map(|p| (p.name, self.inner.get(p.name).unwrap())).collect()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(value_err)
    }

    fn copy(&self) -> Self {
        self.clone()
    }

    fn __getattr__(&self, name: &str) -> PyResult<f64> {
        self.get(name)
    }

    fn __eq__(&self, other: PyRef<'_, PyParams>) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(vfb0={}, mu_ch0={}, r_th={}, ...)", self.inner.vfb0, self.inner.mu_ch0, self.inner.r_th)
    }
}

/// Parameter card: parameters plus device name and provenance.
#[pyclass(name = "ModelCard", module = "sicfet", skip_from_py_object)]
struct PyCard {
    inner: sicfet_core::ModelCard,
}

#[pymethods]
impl PyCard {
    #[new]
    fn new(device_name: &str, params: PyRef<'_, PyParams>) -> Self {
        Self {
            inner: sicfet_core::ModelCard::new(device_name, params.inner.clone()),
        }
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        sicfet_core::ModelCard::parse(text).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn parse_flat(text: &str) -> PyResult<Self> {
        sicfet_core::ModelCard::parse_flat(text).map(|inner| Self { inner }).map_err(value_err)
    }

    #[getter]
    fn device_name(&self) -> String {
        self.inner.device_name.clone()
    }

    #[getter]
    fn params(&self) -> PyParams {
        PyParams {
            inner: self.inner.params.clone(),
        }
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn to_flat(&self) -> String {
        self.inner.to_flat()
    }
}

/// Converged state at one bias point.
#[pyclass(name = "BiasSolution", module = "sicfet", get_all, frozen, skip_from_py_object)]
struct PySolution {
    id: f64,
    psi_p: f64,
    q_src: f64,
    q_drn: f64,
    vds_int: f64,
    r_drift: f64,
    t_j: f64,
    n_slope: f64,
    converged: bool,
    iterations: usize,
}

impl From<model::BiasSolution> for PySolution {
    fn from(s: model::BiasSolution) -> Self {
        Self {
            id: s.id,
            psi_p: s.psi_p,
            q_src: s.q_src,
            q_drn: s.q_drn,
            vds_int: s.vds_int,
            r_drift: s.r_drift,
            t_j: s.t_j,
            n_slope: s.n_slope,
            converged: s.converged,
            iterations: s.iterations,
        }
    }
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!("BiasSolution(id={:e}, t_j={}, converged={})", self.id, self.t_j, self.converged)
    }
}

/// One swept curve.
#[pyclass(name = "Curve", module = "sicfet", get_all, frozen, skip_from_py_object)]
struct PyCurve {
    label: String,
    x: Vec<f64>,
    y: Vec<f64>,
    converged: Vec<bool>,
    t_j: Vec<f64>,
}

impl From<sweep::Curve> for PyCurve {
    fn from(c: sweep::Curve) -> Self {
        Self {
            converged: c.meta.iter().map(|m| m.converged).collect(),
            t_j: c.meta.iter().map(|m| m.t_j).collect(),
            label: c.label,
            x: c.x,
            y: c.y,
        }
    }
}

#[pymethods]
impl PyCurve {
    fn __len__(&self) -> usize {
        self.x.len()
    }
}

/// Measurement set with region labels.
#[pyclass(name = "MeasurementSet", module = "sicfet", skip_from_py_object)]
struct PySet {
    inner: sicfet_core::MeasurementSet,
}

#[pymethods]
impl PySet {
    /// Loads a CSV file and partitions it into regions.
    #[staticmethod]
    #[pyo3(signature = (path, vds_lin_max = 0.5, vds_mid_max = 15.0))]
    fn load(path: &str, vds_lin_max: f64, vds_mid_max: f64) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| value_err(format!("{path}: {e}")))?;
        let set = dataset::load_measurements(file).map_err(value_err)?;
        let th = dataset::RegionThresholds { vds_lin_max, vds_mid_max };
        dataset::partition_regions(&set, &th).map(|inner| Self { inner }).map_err(value_err)
    }

    /// Builds a set from `(vgs, vds, id, t_case)` tuples.
    #[staticmethod]
    fn from_points(points: Vec<(f64, f64, f64, f64)>) -> PyResult<Self> {
        let records = points
            .into_iter()
            .map(|(vgs, vds, id, t)| sicfet_core::MeasurementRecord::new(vgs, vds, id, t))
            .collect();
        let set = sicfet_core::MeasurementSet::from_records(records);
        dataset::partition_regions(&set, &dataset::RegionThresholds::default())
            .map(|inner| Self { inner })
            .map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn count_in(&self, region: &str) -> PyResult<usize> {
        let region: sicfet_core::Region = region.parse().map_err(value_err)?;
        Ok(self.inner.count_in(region))
    }
}

/// Result of a staged fit.
#[pyclass(name = "FitReport", module = "sicfet", skip_from_py_object)]
struct PyReport {
    inner: extraction::FitReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn final_params(&self) -> PyParams {
        PyParams {
            inner: self.inner.final_params.clone(),
        }
    }

    #[getter]
    fn overall_rms(&self) -> f64 {
        self.inner.overall_rms
    }

    #[getter]
    fn per_region_rms(&self) -> BTreeMap<String, Option<f64>> {
        self.inner.per_region_rms.iter().map(|(r, v)| (r.to_string(), *v)).collect()
    }

    #[getter]
    fn aborted(&self) -> Option<String> {
        self.inner.aborted.as_ref().map(|e| e.to_string())
    }

    #[getter]
    fn stages(&self) -> Vec<(String, f64, f64)> {
        self.inner.per_stage.iter().map(|s| (s.name.clone(), s.start_error, s.end_error)).collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }
}

#[pyfunction]
#[pyo3(signature = (params, vgs, vds, t_case = 300.0))]
fn solve_bias_point(params: PyRef<'_, PyParams>, vgs: f64, vds: f64, t_case: f64) -> PyResult<PySolution> {
    let op = model::OperatingPoint::new(vgs, vds, t_case);
    model::solve_bias_point(&params.inner, &op, &SolverOptions::default())
        .map(Into::into)
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (params, vgs = 20.0, t_case = 300.0))]
fn on_resistance(params: PyRef<'_, PyParams>, vgs: f64, t_case: f64) -> PyResult<f64> {
    model::on_resistance(&params.inner, vgs, t_case).map_err(value_err)
}

/// Runs a sweep. `kind` is "transfer", "output" or "transconductance".
#[pyfunction]
#[pyo3(signature = (params, kind, start, stop, points, fixed_bias, scale = "linear", t_case = 300.0, self_heating = true))]
#[allow(clippy::too_many_arguments)]
fn run_sweep(
    py: Python<'_>,
    params: PyRef<'_, PyParams>,
    kind: &str,
    start: f64,
    stop: f64,
    points: usize,
    fixed_bias: Vec<f64>,
    scale: &str,
    t_case: f64,
    self_heating: bool,
) -> PyResult<Vec<PyCurve>> {
    let scale = match scale {
        "linear" => Scale::Linear,
        "log" => Scale::Log,
        other => return Err(value_err(format!("unknown scale {other:?}"))),
    };
    let axis = match kind {
        "transfer" | "transconductance" => Axis::Vgs,
        "output" => Axis::Vds,
        other => return Err(value_err(format!("unknown sweep kind {other:?}"))),
    };
    let spec = sweep::SweepSpec {
        axis,
        start,
        stop,
        points,
        scale,
        fixed_bias,
        t_case,
        self_heating,
    };
    let p = params.inner.clone();
    let opts = SolverOptions::default();
    let curves = py.detach(|| match kind {
        "transfer" => sweep::transfer_sweep(&p, &spec, &opts),
        "output" => sweep::output_sweep(&p, &spec, &opts),
        _ => sweep::transconductance(&p, &spec, &opts),
    });
    curves.map(|cs| cs.into_iter().map(Into::into).collect()).map_err(value_err)
}

/// Relative RMS error of `params` against every point of `data`.
#[pyfunction]
fn model_error(py: Python<'_>, params: PyRef<'_, PyParams>, data: PyRef<'_, PySet>) -> PyResult<f64> {
    let (p, set) = (params.inner.clone(), data.inner.clone());
    py.detach(|| extraction::model_error(&p, &set, extraction::Weighting::Relative))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Runs the default extraction schedule from `params`.
#[pyfunction]
fn fit(py: Python<'_>, params: PyRef<'_, PyParams>, data: PyRef<'_, PySet>) -> PyReport {
    let (p, set) = (params.inner.clone(), data.inner.clone());
    let inner = py.detach(|| sicfet_core::fit_all(&p, &set, &extraction::default_schedule()));
    PyReport { inner }
}

#[pymodule]
fn sicfet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyParams>()?;
    m.add_class::<PyCard>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyCurve>()?;
    m.add_class::<PySet>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(solve_bias_point, m)?)?;
    m.add_function(wrap_pyfunction!(on_resistance, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(model_error, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
