//! Python bindings. Matrices cross the boundary as lists of rows of complex
//! numbers; reports and certificates come back as plain dicts.

use kms_lab_core::config::ExperimentConfig;
use kms_lab_core::exponentiable::{self as ex, Lambda};
use kms_lab_core::matrix::{self, ComplexMatrix};
use kms_lab_core::modular::{self, BetaConvention};
use kms_lab_core::{expansional, perturbation, runner, schatten, SchattenIndex, SeriesBudget, Side};
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyAny;

type Rows = Vec<Vec<Complex64>>;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: Rows) -> PyResult<ComplexMatrix> {
    matrix::from_rows(&rows).map_err(err)
}

fn to_rows(m: &ComplexMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn index(p: f64) -> PyResult<SchattenIndex> {
    SchattenIndex::new(p).map_err(err)
}

/// Serializes through JSON and parses with Python's `json` module.
fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn budget(max_order: usize, tolerance: f64) -> SeriesBudget {
    SeriesBudget::new(max_order, tolerance)
}

/// `‖A‖_p`; `p = float('inf')` gives the operator norm.
#[pyfunction]
fn schatten_norm(a: Rows, p: f64) -> PyResult<f64> {
    Ok(schatten::schatten_norm(&to_matrix(a)?, index(p)?))
}

#[pyfunction]
fn singular_values(a: Rows) -> PyResult<Vec<f64>> {
    matrix::singular_values(&to_matrix(a)?).map_err(err)
}

/// Norming element of the dual ball and the attained value `Re τ(AB)`.
#[pyfunction]
fn dual_witness(a: Rows, p: f64) -> PyResult<(Rows, f64)> {
    let (b, v) = schatten::dual_witness(&to_matrix(a)?, index(p)?).map_err(err)?;
    Ok((to_rows(&b), v))
}

#[pyfunction]
fn check_holder<'py>(py: Python<'py>, mats: Vec<Rows>, ps: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let mats = mats.into_iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
    let idx = ps.into_iter().map(index).collect::<PyResult<Vec<_>>>()?;
    to_py(py, &schatten::check_holder(&mats, &idx).map_err(err)?)
}

#[pyfunction]
fn check_minkowski<'py>(py: Python<'py>, a: Rows, b: Rows, p: f64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &schatten::check_minkowski(&to_matrix(a)?, &to_matrix(b)?, index(p)?).map_err(err)?)
}

#[pyfunction]
fn expm(a: Rows) -> PyResult<Rows> {
    Ok(to_rows(&matrix::expm(&to_matrix(a)?)))
}

/// Ordered exponential of the path `a0 + s·a1` over `[0, t]`.
#[pyfunction]
#[pyo3(signature = (a0, a1, t, side = "right", max_order = 25, tolerance = 1e-10))]
fn expansional_affine(a0: Rows, a1: Rows, t: f64, side: &str, max_order: usize, tolerance: f64) -> PyResult<Rows> {
    let side = match side {
        "right" => Side::Right,
        "left" => Side::Left,
        s => return Err(PyValueError::new_err(format!("side must be 'left' or 'right', got '{s}'"))),
    };
    let path = kms_lab_core::OperatorPath::affine(to_matrix(a0)?, to_matrix(a1)?, t);
    let u = expansional::expansional(&path, t, side, &budget(max_order, tolerance)).map_err(err)?;
    Ok(to_rows(&u))
}

#[pyfunction]
#[pyo3(signature = (a, b, t, max_order = 25, tolerance = 1e-10))]
fn interchange_identity<'py>(py: Python<'py>, a: Rows, b: Rows, t: f64, max_order: usize, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
    let r = expansional::interchange_identity(&to_matrix(a)?, &to_matrix(b)?, t, &budget(max_order, tolerance)).map_err(err)?;
    to_py(py, &r)
}

/// GNS data of a faithful density matrix.
#[pyclass(name = "GnsContext", module = "kms_lab", skip_from_py_object)]
struct PyGnsContext {
    inner: kms_lab_core::GnsContext,
}

#[pymethods]
impl PyGnsContext {
    #[new]
    #[pyo3(signature = (rho, convention = "modular"))]
    fn new(rho: Rows, convention: &str) -> PyResult<Self> {
        let convention = match convention {
            "modular" => BetaConvention::Modular,
            "reversed" => BetaConvention::Reversed,
            s => return Err(PyValueError::new_err(format!("convention must be 'modular' or 'reversed', got '{s}'"))),
        };
        let ctx = modular::build_gns(&to_matrix(rho)?).map_err(err)?;
        Ok(PyGnsContext { inner: ctx.with_beta_convention(convention) })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn spectrum(&self) -> Vec<f64> {
        self.inner.spectrum().to_vec()
    }

    fn modular_flow(&self, a: Rows, t: f64) -> PyResult<Rows> {
        Ok(to_rows(&self.inner.modular_flow(&to_matrix(a)?, t)))
    }

    fn kms_deviation(&self, a: Rows, b: Rows, t: f64) -> PyResult<f64> {
        Ok(self.inner.kms_deviation(&to_matrix(a)?, &to_matrix(b)?, t))
    }

    fn modular_invariants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &modular::modular_invariants(&self.inner).map_err(err)?)
    }

    #[pyo3(signature = (trials = 10, seed = 0))]
    fn kms_check<'py>(&self, py: Python<'py>, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &modular::kms_check(&self.inner, trials, seed))
    }

    /// Series for the perturbed KMS vector and its per-order trace.
    #[pyo3(signature = (q, max_order = 25, tolerance = 1e-10))]
    fn perturbed_kms_vector<'py>(&self, py: Python<'py>, q: Rows, max_order: usize, tolerance: f64) -> PyResult<(Rows, Bound<'py, PyAny>)> {
        let (phi, trace) = perturbation::perturbed_kms_vector(&self.inner, &to_matrix(q)?, &budget(max_order, tolerance)).map_err(err)?;
        Ok((to_rows(&phi), to_py(py, &trace.rows)?))
    }

    fn perturbed_kms_oracle(&self, q: Rows) -> PyResult<Rows> {
        Ok(to_rows(&perturbation::perturbed_kms_oracle(&self.inner, &to_matrix(q)?).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("GnsContext(dim={}, beta={})", self.inner.dim, self.inner.beta())
    }
}

/// Step function `Σ v_m 1_{E_m}` given by its levels and their measures.
#[pyclass(name = "StepFunction", module = "kms_lab", skip_from_py_object)]
struct PyStepFunction {
    inner: ex::StepFunction,
}

#[pymethods]
impl PyStepFunction {
    #[staticmethod]
    fn example1() -> Self {
        PyStepFunction { inner: ex::StepFunction::example1() }
    }

    #[staticmethod]
    fn example2() -> Self {
        PyStepFunction { inner: ex::StepFunction::example2() }
    }

    #[staticmethod]
    fn projection_net(p: f64) -> PyResult<Self> {
        Ok(PyStepFunction { inner: ex::StepFunction::projection_net(p).map_err(err)? })
    }

    #[staticmethod]
    fn finite_list(levels: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(PyStepFunction { inner: ex::StepFunction::finite_list(&levels).map_err(err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyStepFunction { inner: ex::StepFunction::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        Ok(PyStepFunction { inner: self.inner.scaled(c).map_err(err)? })
    }

    fn level(&self, m: usize) -> Option<(f64, f64)> {
        self.inner.level(m)
    }

    fn tail_measure(&self, m: usize) -> f64 {
        self.inner.tail_measure(m)
    }

    fn lp_norm(&self, p: f64) -> PyResult<f64> {
        ex::lp_norm_step(&self.inner, p).map_err(err)
    }

    /// Certificate for `Σ λ^n/n! ‖f^n‖_p`; `lam = float('inf')` asks for every λ.
    #[pyo3(signature = (p, lam, max_order = 25, tolerance = 1e-10))]
    fn exponentiable_series<'py>(&self, py: Python<'py>, p: f64, lam: f64, max_order: usize, tolerance: f64) -> PyResult<Bound<'py, PyAny>> {
        let lambda = if lam.is_infinite() && lam > 0.0 { Lambda::Infinite } else { Lambda::Finite(lam) };
        to_py(py, &ex::exponentiable_series(&self.inner, p, lambda, &budget(max_order, tolerance)).map_err(err)?)
    }

    fn __repr__(&self) -> String {
        format!("StepFunction({})", self.inner.to_json())
    }
}

/// Runs a suite from a JSON config and returns the report as a dict.
#[pyfunction]
fn run_suite<'py>(py: Python<'py>, config_json: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(config_json).map_err(err)?;
    let report = py.detach(|| runner::run_suite(&cfg)).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn kms_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGnsContext>()?;
    m.add_class::<PyStepFunction>()?;
    m.add_function(wrap_pyfunction!(schatten_norm, m)?)?;
    m.add_function(wrap_pyfunction!(singular_values, m)?)?;
    m.add_function(wrap_pyfunction!(dual_witness, m)?)?;
    m.add_function(wrap_pyfunction!(check_holder, m)?)?;
    m.add_function(wrap_pyfunction!(check_minkowski, m)?)?;
    m.add_function(wrap_pyfunction!(expm, m)?)?;
    m.add_function(wrap_pyfunction!(expansional_affine, m)?)?;
    m.add_function(wrap_pyfunction!(interchange_identity, m)?)?;
    m.add_function(wrap_pyfunction!(run_suite, m)?)?;
    Ok(())
}
