//! Python bindings: scenarios, time stepping, diagnostics and batch runs.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use onefield::diagnostics::empirical_terminal_velocity;
use onefield::simulation::{self, Checkpoint, RunOptions, ScenarioConfig, PRESET_NAMES};
use onefield::{FluidMesh, FsiError, Rect};

create_exception!(onefield_py, SolverError, PyException);

fn err(e: FsiError) -> PyErr {
    SolverError::new_err(format!("[{}] {e}", e.stage_tag()))
}

/// A scenario configuration.
#[pyclass(name = "Scenario", module = "onefield_py")]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    #[pyo3(signature = (name, overrides = Vec::new()))]
    fn preset(name: &str, overrides: Vec<String>) -> PyResult<Self> {
        let inner = simulation::preset(name).and_then(|c| c.with_overrides(&overrides)).map_err(err)?;
        Ok(PyScenario { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyScenario {
            inner: ScenarioConfig::from_toml_str(text).map_err(err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(err)
    }

    /// Returns a copy with `key=value` overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        Ok(PyScenario {
            inner: self.inner.with_overrides(&overrides).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn n_steps(&self) -> usize {
        self.inner.n_steps()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.time.dt
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, {} steps)", self.inner.name, self.inner.n_steps())
    }
}

/// A running simulation.
#[pyclass(name = "Simulation", module = "onefield_py", unsendable)]
struct PySimulation {
    inner: simulation::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    fn new(scenario: &PyScenario) -> PyResult<Self> {
        Ok(PySimulation {
            inner: simulation::Simulation::new(scenario.inner.clone()).map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_checkpoint(scenario: &PyScenario, json: &str) -> PyResult<Self> {
        let ck = Checkpoint::from_json(json).map_err(err)?;
        Ok(PySimulation {
            inner: simulation::Simulation::from_checkpoint(scenario.inner.clone(), ck).map_err(err)?,
        })
    }

    fn checkpoint(&self) -> PyResult<String> {
        self.inner.checkpoint().to_json().map_err(err)
    }

    /// Advances `n` steps and returns the report of the last one.
    #[pyo3(signature = (n = 1))]
    fn step<'py>(&mut self, py: Python<'py>, n: usize) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for _ in 0..n {
            let r = self.inner.step().map_err(err)?;
            d.set_item("step", r.step)?;
            d.set_item("time", r.time)?;
            d.set_item("solver_iterations", r.solver_iterations)?;
            d.set_item("relative_residual", r.relative_residual)?;
            d.set_item("divergence_norm", r.divergence_norm)?;
            d.set_item("readapted", r.readapted)?;
        }
        Ok(d)
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.state().time
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.inner.state().step
    }

    /// Free velocity dofs in block layout `[u1; u2]`.
    fn velocity(&self) -> Vec<f64> {
        self.inner.state().u.clone()
    }

    fn pressure(&self) -> Vec<f64> {
        self.inner.state().p.clone()
    }

    /// Current solid node coordinates.
    fn solid_positions(&self) -> Vec<[f64; 2]> {
        self.inner.solid().map(|s| s.current().to_vec()).unwrap_or_default()
    }

    fn solid_velocity(&self) -> Vec<f64> {
        self.inner.state().u_s.clone()
    }

    fn energy<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let e = self.inner.energy().map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("kinetic_fluid", e.kinetic_fluid)?;
        d.set_item("kinetic_solid", e.kinetic_solid)?;
        d.set_item("dissipation", e.dissipation)?;
        d.set_item("potential", e.potential)?;
        d.set_item("total", e.total())?;
        Ok(d)
    }

    #[getter]
    fn mesh_ratio(&self) -> Option<f64> {
        self.inner.mesh_ratio()
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.mesh().n_cells()
    }
}

/// Structured fluid mesh summary: `(cells, velocity dofs per component, pressure dofs)`.
#[pyfunction]
fn structured_mesh(x0: f64, y0: f64, x1: f64, y1: f64, nx: usize, ny: usize) -> PyResult<(usize, usize, usize)> {
    let m = FluidMesh::structured(Rect::new(x0, y0, x1, y1), nx, ny).map_err(err)?;
    Ok((m.n_cells(), m.n_velocity_dofs(), m.n_pressure_dofs()))
}

#[pyfunction]
fn presets() -> Vec<&'static str> {
    PRESET_NAMES.to_vec()
}

/// Empirical terminal velocity of a disc of radius `r` between walls `2l` apart.
#[pyfunction]
fn terminal_velocity(rho_s: f64, rho_f: f64, mu_f: f64, g: f64, r: f64, l: f64) -> f64 {
    empirical_terminal_velocity(rho_s, rho_f, mu_f, g, r, l)
}

/// Runs a scenario, writes its artifacts and returns the summary.
#[pyfunction]
#[pyo3(signature = (scenario, output_dir, max_steps = None, dump_matrices = false))]
fn run<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    output_dir: PathBuf,
    max_steps: Option<usize>,
    dump_matrices: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let s = simulation::run_scenario(
        &scenario.inner,
        &RunOptions {
            output_dir,
            dump_matrices,
            resume: None,
            max_steps,
        },
    )
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("scenario", s.scenario)?;
    d.set_item("steps", s.steps)?;
    d.set_item("final_time", s.final_time)?;
    d.set_item("mesh_ratio", s.mesh_ratio)?;
    d.set_item("max_energy_variation", s.max_energy_variation)?;
    d.set_item("max_area_drift", s.max_area_drift)?;
    Ok(d)
}

#[pymodule]
fn onefield_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(structured_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(terminal_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("SolverError", m.py().get_type::<SolverError>())?;
    Ok(())
}
