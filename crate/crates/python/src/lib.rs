//! Python module `wavepin`: configurations, the stepping simulator,
//! snapshots and trajectory analysis.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use wavepin::driver::{Simulation as CoreSimulation, SimulationConfig};
use wavepin::io::Snapshot;
use wavepin::trajectory::{self, TrajectoryKind};

fn py_err(e: wavepin::Error) -> PyErr {
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

/// Resolved simulation configuration.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct Config {
    inner: SimulationConfig,
}

#[pymethods]
impl Config {
    /// Defaults of the straight-trajectory scenario.
    #[new]
    fn new() -> Self {
        Config {
            inner: SimulationConfig::default(),
        }
    }

    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        Ok(Config {
            inner: wavepin::config::preset(name).map_err(py_err)?,
        })
    }

    /// Every case of a preset, in run order.
    #[staticmethod]
    fn preset_cases(name: &str) -> PyResult<Vec<Config>> {
        Ok(wavepin::config::preset_cases(name)
            .map_err(py_err)?
            .into_iter()
            .map(|inner| Config { inner })
            .collect())
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Config {
            inner: wavepin::config::parse_config(text).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        wavepin::config::to_toml(&self.inner).map_err(py_err)
    }

    /// Copy with the TOML keys of `overrides` applied on top.
    fn with_overrides(&self, overrides: &str) -> PyResult<Self> {
        Ok(Config {
            inner: wavepin::config::with_overrides(&self.inner, overrides).map_err(py_err)?,
        })
    }

    fn violations(&self) -> Vec<String> {
        self.inner.violations()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }
    #[getter]
    fn d_u(&self) -> f64 {
        self.inner.d_u
    }
    #[getter]
    fn d_v(&self) -> f64 {
        self.inner.d_v
    }
    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }
    #[getter]
    fn c(&self) -> f64 {
        self.inner.c
    }
    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }
    #[getter]
    fn u_star(&self) -> f64 {
        self.inner.u_star
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.inner.mass
    }
    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }
    #[getter]
    fn t_final(&self) -> f64 {
        self.inner.t_final
    }
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }
    #[getter]
    fn stationary(&self) -> bool {
        self.inner.stationary
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(name={:?}, d_u={}, d_v={}, chi={}, u_star={}, h={}, dt={}, t_final={})",
            self.inner.name,
            self.inner.d_u,
            self.inner.d_v,
            self.inner.chi,
            self.inner.u_star,
            self.inner.h,
            self.inner.dt,
            self.inner.t_final
        )
    }
}

/// Stepping simulator over one configuration.
#[pyclass(name = "Simulation")]
struct Simulation {
    inner: CoreSimulation,
}

#[pymethods]
impl Simulation {
    #[new]
    fn new(config: &Config) -> PyResult<Self> {
        Ok(Simulation {
            inner: CoreSimulation::new(config.inner.clone()).map_err(py_err)?,
        })
    }

    /// Continue from snapshot text written by `snapshot()`.
    #[staticmethod]
    fn from_snapshot(config: &Config, text: &str) -> PyResult<Self> {
        let snap = Snapshot::parse(text).map_err(py_err)?;
        let state = snap.into_state(config.inner.mass);
        Ok(Simulation {
            inner: CoreSimulation::from_state(config.inner.clone(), state).map_err(py_err)?,
        })
    }

    /// Take `n` steps.
    #[pyo3(signature = (n = 1))]
    fn step(&mut self, py: Python<'_>, n: usize) -> PyResult<()> {
        let sim = &mut self.inner;
        py.detach(|| {
            for _ in 0..n {
                sim.step()?;
            }
            Ok(())
        })
        .map_err(py_err)
    }

    /// Step until `t_final` (the configured final time by default).
    #[pyo3(signature = (t_final = None))]
    fn run(&mut self, py: Python<'_>, t_final: Option<f64>) -> PyResult<()> {
        let sim = &mut self.inner;
        let t = t_final.unwrap_or(sim.config.t_final);
        py.detach(|| sim.run_with(t, |_, _| {})).map_err(py_err)
    }

    #[getter]
    fn t(&self) -> f64 {
        self.inner.state.t
    }
    #[getter]
    fn step_index(&self) -> usize {
        self.inner.step_index
    }
    #[getter]
    fn area(&self) -> f64 {
        self.inner.geometry().total_area()
    }
    /// Accumulated world offset of the box.
    #[getter]
    fn offset(&self) -> (f64, f64) {
        (self.inner.state.offset[0], self.inner.state.offset[1])
    }
    #[getter]
    fn shape(&self) -> (usize, usize) {
        let g = self.inner.state.phi.grid;
        (g.nx, g.ny)
    }

    /// Node values of the level set, row-major.
    fn phi(&self) -> Vec<f64> {
        self.inner.state.phi.values.clone()
    }
    /// Cell values of `u`, NaN outside the cell.
    fn u(&self) -> Vec<f64> {
        self.inner.state.conc.u.clone()
    }
    fn v(&self) -> Vec<f64> {
        self.inner.state.conc.v.clone()
    }

    /// Diagnostics as a dict of equal-length columns.
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.diagnostics();
        let out = PyDict::new(py);
        let col = |f: fn(&wavepin::driver::Record) -> f64| d.iter().map(f).collect::<Vec<f64>>();
        out.set_item("t", col(|r| r.t))?;
        out.set_item("U", col(|r| r.u_total))?;
        out.set_item("V", col(|r| r.v_total))?;
        out.set_item("mass", col(|r| r.mass))?;
        out.set_item("area", col(|r| r.area))?;
        out.set_item("xc", col(|r| r.xc))?;
        out.set_item("yc", col(|r| r.yc))?;
        out.set_item("vx", col(|r| r.vx))?;
        out.set_item("vy", col(|r| r.vy))?;
        Ok(out)
    }

    fn snapshot(&self) -> String {
        Snapshot::from_state(&self.inner.state).to_text()
    }

    fn write_timeseries(&self, path: std::path::PathBuf) -> PyResult<()> {
        wavepin::io::write_timeseries(&path, &self.inner.diagnostics()).map_err(py_err)
    }
}

fn kind_name(k: TrajectoryKind) -> &'static str {
    match k {
        TrajectoryKind::Straight => "straight",
        TrajectoryKind::Circular => "circular",
        TrajectoryKind::Undetermined => "undetermined",
    }
}

/// Classify a center trajectory; returns a dict of metrics.
#[pyfunction]
#[pyo3(signature = (t, x, y, t_skip = 0.0))]
fn classify<'py>(py: Python<'py>, t: Vec<f64>, x: Vec<f64>, y: Vec<f64>, t_skip: f64) -> PyResult<Bound<'py, PyDict>> {
    if t.len() != x.len() || t.len() != y.len() {
        return Err(PyValueError::new_err("t, x and y must have the same length"));
    }
    let c = trajectory::classify_trajectory(&t, &x, &y, t_skip).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("kind", kind_name(c.kind))?;
    out.set_item("heading_change", c.heading_change)?;
    out.set_item("lateral_ratio", c.lateral_ratio)?;
    out.set_item("monotone", c.monotone)?;
    out.set_item("radius", c.radius)?;
    out.set_item("circle_center", c.circle_center.map(|p| (p[0], p[1])))?;
    out.set_item("samples", c.samples)?;
    Ok(out)
}

/// Start of the first window in which the heading is steady ("straight")
/// or turning steadily ("circular").
#[pyfunction]
#[pyo3(signature = (t, x, y, kind, window = 5.0))]
fn preparation_time(t: Vec<f64>, x: Vec<f64>, y: Vec<f64>, kind: &str, window: f64) -> PyResult<Option<f64>> {
    let kind = match kind {
        "straight" => TrajectoryKind::Straight,
        "circular" => TrajectoryKind::Circular,
        other => return Err(PyValueError::new_err(format!("unknown kind {other:?}"))),
    };
    Ok(trajectory::preparation_time(&t, &x, &y, kind, window))
}

#[pyfunction]
fn reaction_f(u: f64, v: f64, k: f64, c: f64) -> f64 {
    wavepin::kinetics::reaction_f(u, v, k, c)
}

/// `(name, description)` pairs of the built-in presets.
#[pyfunction]
fn presets() -> Vec<(&'static str, &'static str)> {
    wavepin::config::PRESETS.to_vec()
}

#[pymodule(name = "wavepin")]
fn wavepin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Config>()?;
    m.add_class::<Simulation>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(preparation_time, m)?)?;
    m.add_function(wrap_pyfunction!(reaction_f, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    Ok(())
}
