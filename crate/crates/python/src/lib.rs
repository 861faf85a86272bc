//! Python bindings: sets, DR steps and runs, rate bounds and fits, and the
//! scenario pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use drfeas::dr;
use drfeas::harness::{builtin_scenarios, find_scenario, report_json, run_pipeline, RunOptions, Scenario};
use drfeas::rate::fit_geometric;
use drfeas::regularity::{kappa_bound as bound, RateVariant};
use drfeas::{Error, SetDescriptor, Vector};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vec_of(coords: Vec<f64>) -> PyResult<Vector> {
    Vector::new(coords).map_err(py_err)
}

fn coords(v: &Vector) -> Vec<f64> {
    v.coords().to_vec()
}

/// A closed set in ℝᵈ.
#[pyclass(name = "Set", module = "drfeas", frozen)]
struct PySet {
    inner: SetDescriptor,
}

impl From<SetDescriptor> for PySet {
    fn from(inner: SetDescriptor) -> Self {
        Self { inner }
    }
}

#[pymethods]
impl PySet {
    #[staticmethod]
    #[pyo3(signature = (base_point, directions = Vec::new()))]
    fn affine(base_point: Vec<f64>, directions: Vec<Vec<f64>>) -> PyResult<Self> {
        let dirs = directions.into_iter().map(vec_of).collect::<PyResult<Vec<_>>>()?;
        Ok(SetDescriptor::affine(vec_of(base_point)?, &dirs).map_err(py_err)?.into())
    }

    #[staticmethod]
    fn half_space(normal: Vec<f64>, offset: f64) -> PyResult<Self> {
        Ok(SetDescriptor::half_space(vec_of(normal)?, offset).map_err(py_err)?.into())
    }

    #[staticmethod]
    fn slab(normal: Vec<f64>, lo: f64, hi: f64) -> PyResult<Self> {
        Ok(SetDescriptor::slab(vec_of(normal)?, lo, hi).map_err(py_err)?.into())
    }

    #[staticmethod]
    fn ball(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(SetDescriptor::ball(vec_of(center)?, radius).map_err(py_err)?.into())
    }

    #[staticmethod]
    fn sphere(center: Vec<f64>, radius: f64) -> PyResult<Self> {
        Ok(SetDescriptor::sphere(vec_of(center)?, radius).map_err(py_err)?.into())
    }

    #[staticmethod]
    #[pyo3(name = "box")]
    fn bounding_box(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Ok(SetDescriptor::bounding_box(vec_of(lo)?, vec_of(hi)?).map_err(py_err)?.into())
    }

    #[staticmethod]
    fn parabola_hypograph(a: f64) -> PyResult<Self> {
        Ok(SetDescriptor::parabola_hypograph(a).map_err(py_err)?.into())
    }

    /// Parses the JSON set format used by scenario files.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: SetDescriptor = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(inner.into())
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn is_convex(&self) -> bool {
        self.inner.is_convex()
    }

    /// The selected nearest point.
    fn project(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(coords(&self.inner.project(&vec_of(x)?).map_err(py_err)?.selected))
    }

    fn reflect(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(coords(&self.inner.reflect(&vec_of(x)?).map_err(py_err)?.selected))
    }

    fn distance(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.distance(&vec_of(x)?).map_err(py_err)
    }

    #[pyo3(signature = (x, tol = 1e-9))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> PyResult<bool> {
        self.inner.contains(&vec_of(x)?, tol).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Set({})", serde_json::to_string(&self.inner).unwrap_or_default())
    }
}

/// One DR step from `x`: a dict with `x`, `a`, `u`, `b`, `x_next`, `residual`.
#[pyfunction]
fn dr_step<'py>(py: Python<'py>, a: &PySet, b: &PySet, x: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let step = dr::dr_step(&a.inner, &b.inner, &vec_of(x)?).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("x", coords(&step.x))?;
    d.set_item("a", coords(&step.a))?;
    d.set_item("u", coords(&step.u))?;
    d.set_item("b", coords(&step.b))?;
    d.set_item("x_next", coords(&step.x_next))?;
    d.set_item("residual", step.residual)?;
    Ok(d)
}

/// DR iteration from `x0`: a dict with `iterates`, `residuals`,
/// `stop_reason` and `limit` (None unless converged).
#[pyfunction]
#[pyo3(signature = (a, b, x0, max_iters = 100_000, tol = 1e-12))]
fn run<'py>(
    py: Python<'py>,
    a: &PySet,
    b: &PySet,
    x0: Vec<f64>,
    max_iters: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let traj = dr::run(&a.inner, &b.inner, &vec_of(x0)?, max_iters, tol).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("iterates", traj.iterates().iter().map(coords).collect::<Vec<_>>())?;
    d.set_item("residuals", traj.residuals())?;
    d.set_item("stop_reason", traj.stop_reason.to_string())?;
    d.set_item("limit", traj.limit_estimate.as_ref().map(coords))?;
    Ok(d)
}

/// Rate bound from regularity constants; `variant` is "general" or "affine_A".
#[pyfunction]
#[pyo3(signature = (eps_a, eps_b, theta, mu, variant = "general"))]
fn kappa_bound<'py>(
    py: Python<'py>,
    eps_a: f64,
    eps_b: f64,
    theta: f64,
    mu: f64,
    variant: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let variant = match variant {
        "general" => RateVariant::General,
        "affine_A" => RateVariant::AffineA,
        other => return Err(PyValueError::new_err(format!("unknown variant `{other}`"))),
    };
    let r = bound(eps_a, eps_b, theta, mu, variant).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("kappa_sq", r.kappa_sq)?;
    d.set_item("kappa", r.kappa)?;
    d.set_item("feasible", r.feasible)?;
    Ok(d)
}

/// Geometric envelope `e_n <= C κⁿ` fitted to an error sequence.
#[pyfunction]
#[pyo3(signature = (errors, tail_fraction = 0.5))]
fn fit<'py>(py: Python<'py>, errors: Vec<f64>, tail_fraction: f64) -> PyResult<Bound<'py, PyDict>> {
    let f = fit_geometric(&errors, tail_fraction).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("kappa", f.kappa)?;
    d.set_item("C", f.c)?;
    d.set_item("r_squared", f.r_squared)?;
    d.set_item("tail_start", f.tail_start)?;
    d.set_item("finite_termination", f.finite_termination)?;
    Ok(d)
}

#[pyfunction]
fn scenario_names() -> Vec<String> {
    builtin_scenarios().into_iter().map(|s| s.name).collect()
}

/// Runs the full pipeline on a built-in scenario name or a scenario JSON
/// document and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, x0 = None, max_iters = None, tol = None, seed = None))]
fn run_scenario(
    py: Python<'_>,
    scenario: &str,
    x0: Option<Vec<f64>>,
    max_iters: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
) -> PyResult<String> {
    let mut s = match scenario.trim_start().starts_with('{') {
        true => Scenario::from_json(scenario, "config").map_err(py_err)?,
        false => find_scenario(scenario).map_err(py_err)?,
    };
    if let Some(x0) = x0 {
        s = s.with_start(vec_of(x0)?).map_err(py_err)?;
    }
    let defaults = RunOptions::default();
    let opts = RunOptions {
        max_iters: max_iters.unwrap_or(defaults.max_iters),
        tol: tol.unwrap_or(defaults.tol),
        seed: seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let outcome = py.detach(|| run_pipeline(&s, &opts)).map_err(py_err)?;
    report_json(&outcome.report).map_err(py_err)
}

#[pymodule]
#[pyo3(name = "drfeas")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySet>()?;
    m.add_function(wrap_pyfunction!(dr_step, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_bound, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(scenario_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
