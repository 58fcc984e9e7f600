//! Python bindings. Distributions cross the boundary as lists of floats and
//! matrices as lists of rows.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ricci_mcmc::dynamics::Observer;
use ricci_mcmc::experiments::GeneratorKind;
use ricci_mcmc::nalgebra::DMatrix;
use ricci_mcmc::{self as core, Distribution, Error, PhiFunction};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn nalgebra_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn dist(values: Vec<f64>) -> PyResult<Distribution> {
    Distribution::new(values).map_err(to_py)
}

fn phi(name: &str) -> PyResult<PhiFunction> {
    name.parse().map_err(to_py)
}

fn kind(name: &str) -> PyResult<GeneratorKind> {
    name.parse().map_err(to_py)
}

/// A reversible generator for a target law.
#[pyclass(name = "Generator", module = "ricci_mcmc_py", frozen)]
struct PyGenerator {
    inner: core::Generator,
    kind: GeneratorKind,
}

#[pymethods]
impl PyGenerator {
    /// `kind` is "optimal" or "mh".
    #[new]
    fn new(pi: Vec<f64>, kind: &str) -> PyResult<Self> {
        let kind = self::kind(kind)?;
        Ok(Self {
            inner: kind.build(&dist(pi)?),
            kind,
        })
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.kind.name()
    }

    #[getter]
    fn pi(&self) -> Vec<f64> {
        self.inner.pi().as_slice().to_vec()
    }

    fn q(&self) -> Vec<Vec<f64>> {
        nalgebra_rows(self.inner.q())
    }

    fn max_exit_rate(&self) -> f64 {
        self.inner.max_exit_rate()
    }

    fn euler_step(&self, p: Vec<f64>, dt: f64) -> PyResult<Vec<f64>> {
        let p = dist(p)?;
        Ok(core::euler_step(&self.inner, &p, dt, true).map_err(to_py)?.into_vec())
    }

    /// Returns `{"t": [...], <observer>: [...], ...}`.
    #[pyo3(signature = (p0, dt, t_end, observers = vec!["l1".to_string()]))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        p0: Vec<f64>,
        dt: f64,
        t_end: f64,
        observers: Vec<String>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let p0 = dist(p0)?;
        let obs: Vec<Observer> = observers
            .iter()
            .map(|o| Observer::by_name(o, self.inner.pi()))
            .collect::<Result<_, _>>()
            .map_err(to_py)?;
        let cfg = core::IntegratorConfig::new(dt, t_end).keep_states(false);
        let traj = core::simulate(&self.inner, &p0, &cfg, &obs).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("t", traj.times)?;
        for (name, series) in traj.observations {
            out.set_item(name, series)?;
        }
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Generator(kind={}, n={})", self.kind, self.inner.len())
    }
}

#[pyfunction]
fn optimal_c(pi: Vec<f64>) -> PyResult<f64> {
    Ok(core::optimal_c(&dist(pi)?).value())
}

#[pyfunction]
fn build_optimal_q(pi: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(nalgebra_rows(core::build_optimal_q(&dist(pi)?).q()))
}

#[pyfunction]
fn build_mh_q(pi: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(nalgebra_rows(core::build_mh_q(&dist(pi)?).q()))
}

#[pyfunction]
fn build_optimal_weights(pi: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    Ok(nalgebra_rows(core::build_optimal_weights(&dist(pi)?).omega()))
}

/// `D_φ(p‖π)` for `phi` in kl | rkl | chi2 | alpha:<a>.
#[pyfunction]
fn divergence(phi: &str, p: Vec<f64>, pi: Vec<f64>) -> PyResult<f64> {
    core::divergence(&self::phi(phi)?, &dist(p)?, &dist(pi)?).map_err(to_py)
}

#[pyfunction]
fn l1_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    core::l1_distance(&dist(p)?, &dist(q)?).map_err(to_py)
}

#[pyfunction]
fn xi_phi(phi: &str, s: f64, t: f64) -> PyResult<f64> {
    core::xi_phi(&self::phi(phi)?, s, t).map_err(to_py)
}

#[pyfunction]
fn kappa_formula_thm2(pi: Vec<f64>, phi: &str) -> PyResult<f64> {
    core::kappa_formula_thm2(&dist(pi)?, &self::phi(phi)?).map_err(to_py)
}

#[pyfunction]
fn kappa_sqrt_bound(pi: Vec<f64>) -> PyResult<f64> {
    Ok(core::kappa_sqrt_bound(&dist(pi)?))
}

#[pyfunction]
fn exact_solution_optimal(pi: Vec<f64>, p0: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    Ok(core::exact_solution_optimal(&dist(pi)?, &dist(p0)?, t).map_err(to_py)?.into_vec())
}

/// Curvature bounds of the optimal weights for `pi`, evaluated at `p`
/// (default: `pi`).
#[pyfunction]
#[pyo3(signature = (pi, phi, p = None))]
fn curvature_report<'py>(
    py: Python<'py>,
    pi: Vec<f64>,
    phi: &str,
    p: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let pi = dist(pi)?;
    let p = match p {
        Some(v) => dist(v)?,
        None => pi.clone(),
    };
    let w = core::build_optimal_weights(&pi);
    let r = core::curvature_report(&w, &self::phi(phi)?, &p).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("ratio_bound", r.ratio_bound)?;
    out.set_item("exact_kappa", r.exact_kappa)?;
    out.set_item("kappa_thm2", r.kappa_thm2)?;
    out.set_item("kappa_sqrt_bound", r.kappa_sqrt_bound)?;
    Ok(out)
}

/// Returns `{"t": [...], "<generator>_<observer>": [...], ...}`.
#[pyfunction]
#[pyo3(signature = (n, k, seed, dt = 0.01, t_end = 10.0, observers = vec!["l1".to_string()], shared_target = false))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    n: usize,
    k: usize,
    seed: u64,
    dt: f64,
    t_end: f64,
    observers: Vec<String>,
    shared_target: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = core::ExperimentConfig {
        dt,
        t_end,
        observers,
        shared_target,
        ..core::ExperimentConfig::new(n, k, seed)
    };
    let res = py.detach(|| core::run_experiment(&cfg)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("t", &res.times)?;
    for s in &res.mean_series {
        out.set_item(s.column_name(), &s.values)?;
    }
    Ok(out)
}

#[pymodule]
fn ricci_mcmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGenerator>()?;
    m.add_function(wrap_pyfunction!(optimal_c, m)?)?;
    m.add_function(wrap_pyfunction!(build_optimal_q, m)?)?;
    m.add_function(wrap_pyfunction!(build_mh_q, m)?)?;
    m.add_function(wrap_pyfunction!(build_optimal_weights, m)?)?;
    m.add_function(wrap_pyfunction!(divergence, m)?)?;
    m.add_function(wrap_pyfunction!(l1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(xi_phi, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_formula_thm2, m)?)?;
    m.add_function(wrap_pyfunction!(kappa_sqrt_bound, m)?)?;
    m.add_function(wrap_pyfunction!(exact_solution_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(curvature_report, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
