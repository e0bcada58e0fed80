//! Python bindings for the `ringvortex` crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ::ringvortex::bodies::{Body, BodyConfiguration};
use ::ringvortex::coefficients::{self, AssemblyOptions, CoefficientSet};
use ::ringvortex::config::RunConfig;
use ::ringvortex::dynamics::{self, IntegratorControls, Trajectory};
use ::ringvortex::kernels::{self, HalfPlanePoint};
use ::ringvortex::pointvortex::{self, PvSystem};
use ::ringvortex::{special, sweep, validate};

fn err(e: ::ringvortex::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn system(name: &str) -> PyResult<PvSystem> {
    match name.to_ascii_uppercase().as_str() {
        "J1" => Ok(PvSystem::J1),
        "J2" => Ok(PvSystem::J2),
        _ => Err(PyValueError::new_err(format!("unknown point-vortex system `{name}` (expected J1 or J2)"))),
    }
}

fn point(r: f64, z: f64) -> PyResult<HalfPlanePoint> {
    HalfPlanePoint::new(r, z).map_err(err)
}

#[pyfunction]
fn elliptic_k(m: f64) -> PyResult<f64> {
    special::elliptic_k(m).map_err(err)
}

#[pyfunction]
fn elliptic_e(m: f64) -> PyResult<f64> {
    special::elliptic_e(m).map_err(err)
}

/// Axisymmetric stream-function kernel between `x = (r1, z1)` and `y = (r2, z2)`.
#[pyfunction]
fn stream_kernel(r1: f64, z1: f64, r2: f64, z2: f64) -> PyResult<f64> {
    kernels::stream_kernel(point(r1, z1)?, point(r2, z2)?).map_err(err)
}

/// Axisymmetric Laplace ring kernel between `x = (r1, z1)` and `y = (r2, z2)`.
#[pyfunction]
fn laplace_ring_kernel(r1: f64, z1: f64, r2: f64, z2: f64) -> PyResult<f64> {
    kernels::laplace_ring_kernel(point(r1, z1)?, point(r2, z2)?).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (system, gamma, qtilde, r0 = 1.0))]
fn pv_velocity(system: &str, gamma: Vec<f64>, qtilde: Vec<f64>, r0: f64) -> PyResult<Vec<f64>> {
    pointvortex::pv_velocity(self::system(system)?, &gamma, &qtilde, r0).map_err(err)
}

/// Returns `(H, P)`.
#[pyfunction]
#[pyo3(signature = (system, gamma, qtilde, r0 = 1.0))]
fn pv_invariants(system: &str, gamma: Vec<f64>, qtilde: Vec<f64>, r0: f64) -> PyResult<(f64, f64)> {
    pointvortex::pv_invariants(self::system(system)?, &gamma, &qtilde, r0).map_err(err)
}

/// Bodies in physical coordinates.
#[pyclass(name = "BodyConfiguration", frozen)]
struct PyBodyConfiguration(BodyConfiguration);

#[pymethods]
impl PyBodyConfiguration {
    /// `bodies` is a list of `(volume, gamma, R, Z)` tuples.
    #[new]
    fn new(bodies: Vec<(f64, f64, f64, f64)>) -> PyResult<Self> {
        let b = bodies.into_iter().map(|(v, g, r, z)| Body::new(v, g, r, z)).collect();
        BodyConfiguration::new(b).map(Self).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn positions(&self) -> Vec<f64> {
        self.0.positions()
    }

    #[getter]
    fn radii(&self) -> Vec<f64> {
        self.0.radii()
    }

    #[getter]
    fn gammas(&self) -> Vec<f64> {
        self.0.gammas()
    }

    /// Assembles `E, M, A, G, C` (and `Γ` data unless `derivatives=False`).
    #[pyo3(signature = (nodes = 16, derivatives = true))]
    fn assemble(&self, py: Python<'_>, nodes: usize, derivatives: bool) -> PyResult<PyCoefficientSet> {
        let opts = AssemblyOptions { nodes, derivatives, ..Default::default() };
        py.detach(|| coefficients::assemble(&self.0, opts)).map(PyCoefficientSet).map_err(err)
    }

    /// Integrates the body equation from rest velocity `qdot0` (slow manifold if omitted).
    #[pyo3(signature = (horizon, qdot0 = None, nodes = 16, rtol = 1e-7, atol = 1e-10))]
    fn integrate(
        &self,
        py: Python<'_>,
        horizon: f64,
        qdot0: Option<Vec<f64>>,
        nodes: usize,
        rtol: f64,
        atol: f64,
    ) -> PyResult<PyTrajectory> {
        let controls = IntegratorControls { rtol, atol, nodes, ..Default::default() };
        py.detach(|| {
            let qdot0 = match qdot0 {
                Some(v) => v,
                None => {
                    let c = coefficients::assemble(
                        &self.0,
                        AssemblyOptions { nodes, derivatives: false, ..Default::default() },
                    )?;
                    dynamics::steady_velocity(&c)?
                }
            };
            dynamics::integrate_body(&self.0, &qdot0, horizon, &controls)
        })
        .map(PyTrajectory)
        .map_err(err)
    }
}

#[pyclass(name = "CoefficientSet", frozen)]
struct PyCoefficientSet(CoefficientSet);

#[pymethods]
impl PyCoefficientSet {
    #[getter]
    fn e(&self) -> Vec<Vec<f64>> {
        rows(&self.0.e)
    }

    #[getter]
    fn m(&self) -> Vec<Vec<f64>> {
        rows(&self.0.m)
    }

    #[getter]
    fn a(&self) -> Vec<Vec<f64>> {
        rows(&self.0.a)
    }

    #[getter]
    fn g(&self) -> Vec<f64> {
        self.0.g.iter().copied().collect()
    }

    #[getter]
    fn c(&self) -> Vec<Vec<f64>> {
        rows(&self.0.c)
    }

    /// `(λ_min, λ_max)` of `E + M`.
    fn inertia_spectrum(&self) -> (f64, f64) {
        self.0.inertia_spectrum()
    }

    fn total_energy(&self, qdot: Vec<f64>) -> PyResult<f64> {
        coefficients::total_energy(&qdot, &self.0).map_err(err)
    }

    fn acceleration(&self, qdot: Vec<f64>) -> PyResult<Vec<f64>> {
        coefficients::body_acceleration(&qdot, &self.0).map_err(err)
    }

    fn steady_velocity(&self) -> PyResult<Vec<f64>> {
        dynamics::steady_velocity(&self.0).map_err(err)
    }

    /// Labeled record as a JSON string.
    fn to_json(&self) -> String {
        self.0.record().to_string()
    }
}

#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn times(&self) -> Vec<f64> {
        self.0.times.clone()
    }

    #[getter]
    fn q(&self) -> Vec<Vec<f64>> {
        self.0.q.clone()
    }

    #[getter]
    fn qdot(&self) -> Vec<Vec<f64>> {
        self.0.qdot.clone()
    }

    #[getter]
    fn energy(&self) -> Vec<f64> {
        self.0.energy.clone()
    }

    #[getter]
    fn completed(&self) -> bool {
        self.0.termination.completed()
    }

    #[getter]
    fn termination(&self) -> String {
        serde_json::to_string(&self.0.termination).unwrap_or_default()
    }

    fn energy_drift(&self) -> f64 {
        self.0.energy_drift()
    }

    fn exchanges(&self, i: usize, j: usize) -> usize {
        self.0.exchanges(i, j)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.0.write_csv(&mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "RunConfig", frozen)]
struct PyRunConfig(RunConfig);

#[pymethods]
impl PyRunConfig {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        RunConfig::from_json(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_path(path: std::path::PathBuf) -> PyResult<Self> {
        RunConfig::from_path(&path).map(Self).map_err(err)
    }

    /// Two equal rings in the logarithmic regime.
    #[staticmethod]
    fn leapfrog() -> Self {
        Self(RunConfig::leapfrog())
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn epsilons(&self) -> Vec<f64> {
        self.0.epsilons()
    }

    /// Physical configuration at `epsilon`.
    fn configuration(&self, epsilon: f64) -> PyResult<PyBodyConfiguration> {
        sweep::prepare(&self.0, epsilon).map(|p| PyBodyConfiguration(p.config)).map_err(err)
    }

    /// Body run at `epsilon`; returns `(physical, rescaled)`.
    fn simulate(&self, py: Python<'_>, epsilon: f64) -> PyResult<(PyTrajectory, PyTrajectory)> {
        py.detach(|| sweep::simulate(&self.0, epsilon))
            .map(|r| (PyTrajectory(r.physical), PyTrajectory(r.rescaled)))
            .map_err(err)
    }

    fn point_vortex(&self, py: Python<'_>) -> PyResult<PyTrajectory> {
        py.detach(|| sweep::point_vortex_run(&self.0)).map(PyTrajectory).map_err(err)
    }

    /// Runs the ε-sweep; returns the report as a JSON string.
    fn sweep(&self, py: Python<'_>) -> PyResult<String> {
        let rep = py.detach(|| sweep::run_epsilon_sweep(&self.0)).map_err(err)?;
        serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

/// Runs the validation suite; returns `(passed, report_json)`.
#[pyfunction]
#[pyo3(signature = (level = "fast"))]
fn run_validation(py: Python<'_>, level: &str) -> PyResult<(bool, String)> {
    let level: validate::Level = level.parse().map_err(err)?;
    let rep = py.detach(|| validate::run_validation_suite(level, false));
    let json = serde_json::to_string(&rep).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((rep.passed(), json))
}

#[pymodule]
#[pyo3(name = "ringvortex")]
fn ringvortex_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(elliptic_k, m)?)?;
    m.add_function(wrap_pyfunction!(elliptic_e, m)?)?;
    m.add_function(wrap_pyfunction!(stream_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(laplace_ring_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(pv_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(pv_invariants, m)?)?;
    m.add_function(wrap_pyfunction!(run_validation, m)?)?;
    m.add_class::<PyBodyConfiguration>()?;
    m.add_class::<PyCoefficientSet>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyRunConfig>()?;
    Ok(())
}
