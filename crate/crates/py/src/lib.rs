//! Python bindings: models, moments, symmetry and independence checks,
//! CLT moments, tuple calculus and the scenario runner.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use ncprob_core::clt::{self, ReferenceLaw};
use ncprob_core::indcheck::{check_sequence_independence, IndependenceMode};
use ncprob_core::matalg::C64;
use ncprob_core::report::{run_scenario_text, RunOptions};
use ncprob_core::scenario::{Candidate, ModelSpec};
use ncprob_core::seqmodel::{self, RandomSequenceModel};
use ncprob_core::symcheck::{self, SymmetryKind};
use ncprob_core::tuplecomb::{self, IndexTuple, Relation};
use ncprob_core::{cli, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Internal(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Parse a snake_case string into one of the core enums.
fn parse<T: DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} `{s}`")))
}

/// Serialize to JSON and hand back a Python object through `json.loads`.
fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A finite window of a random sequence.
#[pyclass(name = "Model", module = "ncprob", frozen)]
struct PyModel {
    inner: RandomSequenceModel,
}

#[pymethods]
impl PyModel {
    /// Build from a model spec as used in scenario files, e.g.
    /// `{"kind": "codomain_perturbed", "omega": {"re": -1}}`.
    #[staticmethod]
    fn from_spec(spec: &str, window: usize) -> PyResult<Self> {
        let spec: ModelSpec = serde_json::from_str(spec).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyModel {
            inner: spec.build(window).map_err(err)?,
        })
    }

    #[staticmethod]
    fn iid_tensor(window: usize) -> PyResult<Self> {
        Self::from_spec(r#"{"kind": "iid_tensor"}"#, window)
    }

    #[staticmethod]
    fn coin_mixture(atoms: Vec<(f64, f64)>, window: usize) -> PyResult<Self> {
        Ok(PyModel {
            inner: seqmodel::coin_mixture_sequence(&atoms, window).map_err(err)?,
        })
    }

    #[staticmethod]
    fn codomain_perturbed(omega: C64, window: usize) -> PyResult<Self> {
        Ok(PyModel {
            inner: seqmodel::codomain_perturbed_sequence(omega, window).map_err(err)?,
        })
    }

    /// Braided sequence generated by `U_ω`.
    #[staticmethod]
    fn yang_baxter(omega: C64, window: usize) -> PyResult<Self> {
        let u = seqmodel::u_omega(omega);
        Ok(PyModel {
            inner: seqmodel::yang_baxter_sequence(&u, window).map_err(err)?,
        })
    }

    #[staticmethod]
    fn calibration(delta: f64, window: usize) -> PyResult<Self> {
        Ok(PyModel {
            inner: seqmodel::calibration_sequence(delta, window).map_err(err)?,
        })
    }

    #[getter]
    fn window(&self) -> usize {
        self.inner.window()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn basis_size(&self) -> usize {
        self.inner.basis().len()
    }

    fn psi_moment(&self, tuple: Vec<usize>, basis: Vec<usize>) -> PyResult<C64> {
        self.inner.psi_moment(&IndexTuple::new(tuple), &basis).map_err(err)
    }

    #[pyo3(signature = (kind, degree, window=None, tol=1e-9))]
    fn check_symmetry<'py>(
        &self,
        py: Python<'py>,
        kind: &str,
        degree: usize,
        window: Option<usize>,
        tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let kind: SymmetryKind = parse("symmetry kind", kind)?;
        let w = window.unwrap_or(self.inner.window());
        let v = py
            .detach(|| symcheck::check_symmetry(&self.inner, kind, degree, w, tol))
            .map_err(err)?;
        to_py(py, &v)
    }

    /// Independence over `candidate` ("scalars" or "fiber_scalars").
    #[pyo3(signature = (mode, candidate, max_set_size, tol=1e-9))]
    fn check_independence<'py>(
        &self,
        py: Python<'py>,
        mode: &str,
        candidate: &str,
        max_set_size: usize,
        tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mode: IndependenceMode = parse("independence mode", mode)?;
        let candidate: Candidate = parse("candidate", candidate)?;
        let v = py
            .detach(|| {
                let n = candidate.build(&self.inner)?;
                check_sequence_independence(&self.inner, &n, mode, max_set_size, tol)
            })
            .map_err(err)?;
        to_py(py, &v)
    }

    /// `ψ(S_N(x)^p)` for `x` the basis element `basis`, by brute force or by order classes.
    #[pyo3(signature = (basis, p, n, method="classes", tol=1e-9))]
    fn sn_moment(&self, py: Python<'_>, basis: usize, p: usize, n: usize, method: &str, tol: f64) -> PyResult<f64> {
        let x = self
            .inner
            .basis()
            .get(basis)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("basis index {basis} out of range")))?;
        py.detach(|| match method {
            "classes" => clt::sn_moment_by_classes(&self.inner, &x, p, n, tol),
            "bruteforce" => clt::sn_moment_bruteforce(&self.inner, &x, p, n),
            other => Err(Error::Validation(format!("unknown method `{other}`"))),
        })
        .map_err(err)
    }

    /// Limit moment `p!!·a_p(x)` with its class breakdown.
    #[pyo3(signature = (basis, p, tol=1e-9))]
    fn clt_limit<'py>(&self, py: Python<'py>, basis: usize, p: usize, tol: f64) -> PyResult<Bound<'py, PyAny>> {
        let x = self
            .inner
            .basis()
            .get(basis)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("basis index {basis} out of range")))?;
        let l = py
            .detach(|| clt::clt_limit(&self.inner, &x, p, None, tol))
            .map_err(err)?;
        to_py(py, &l)
    }

    fn __repr__(&self) -> String {
        format!("Model({}, window={})", self.inner.label(), self.inner.window())
    }
}

#[pyfunction]
fn canon(relation: &str, tuple: Vec<usize>) -> PyResult<Vec<usize>> {
    let r: Relation = parse("relation", relation)?;
    Ok(tuplecomb::canon(r, &IndexTuple::new(tuple)).entries().to_vec())
}

#[pyfunction]
fn are_equivalent(relation: &str, s: Vec<usize>, t: Vec<usize>) -> PyResult<bool> {
    let r: Relation = parse("relation", relation)?;
    tuplecomb::are_equivalent(r, &IndexTuple::new(s), &IndexTuple::new(t)).map_err(err)
}

#[pyfunction]
fn double_factorial(p: usize) -> u128 {
    tuplecomb::pair_double_factorial(p)
}

#[pyfunction]
#[pyo3(signature = (law, p, q=None))]
fn reference_moment(law: &str, p: usize, q: Option<f64>) -> PyResult<f64> {
    let law: ReferenceLaw = parse("law", law)?;
    clt::reference_moment(law, p, q).map_err(err)
}

#[pyfunction]
fn braid_residual(omega: C64) -> PyResult<f64> {
    Ok(symcheck::check_braid_relation(&seqmodel::u_omega(omega), 1e-12)
        .map_err(err)?
        .residual)
}

/// Run a scenario given as JSON text or the name of a shipped scenario.
/// Returns `(exit_code, report)`.
#[pyfunction]
#[pyo3(signature = (config, tol=None))]
fn run_scenario<'py>(py: Python<'py>, config: &str, tol: Option<f64>) -> PyResult<(i32, Bound<'py, PyAny>)> {
    let text = if config.trim_start().starts_with('{') {
        config.to_string()
    } else {
        cli::load_config(config).map_err(err)?
    };
    let out = py.detach(|| run_scenario_text(&text, &RunOptions { tolerance: tol }));
    Ok((out.exit_code(), to_py(py, &out.report)?))
}

#[pyfunction]
fn shipped_scenarios() -> Vec<&'static str> {
    ncprob_core::scenario::SHIPPED.iter().map(|(name, _)| *name).collect()
}

#[pyfunction]
fn describe(kind: &str) -> PyResult<String> {
    cli::describe_check(kind).map_err(err)
}

#[pymodule]
fn ncprob(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(canon, m)?)?;
    m.add_function(wrap_pyfunction!(are_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(double_factorial, m)?)?;
    m.add_function(wrap_pyfunction!(reference_moment, m)?)?;
    m.add_function(wrap_pyfunction!(braid_residual, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(shipped_scenarios, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    Ok(())
}
