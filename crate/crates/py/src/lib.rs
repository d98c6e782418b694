//! Python bindings. Reports come back as plain dicts built from the same
//! JSON payloads the CLI emits.

use cwglauber::dynamics::{self, MetastableSpec, RunSpec, Start};
use cwglauber::mixing_analysis::{self as mix, MixMethod, MixOptions, Target};
use cwglauber::phase_geometry;
use cwglauber::potential;
use cwglauber::{ModelParams, RootFindOpts};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

pyo3::create_exception!(cwglauber_py, CwglauberError, PyValueError);

fn err(e: cwglauber::Error) -> PyErr {
    CwglauberError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn params(p: u32, beta: f64, h: f64) -> PyResult<ModelParams> {
    ModelParams::new(p, beta, h).map_err(err)
}

fn parse_target(s: &str) -> PyResult<Target> {
    match s {
        "curie-weiss" => Ok(Target::CurieWeiss),
        "kernel" => Ok(Target::Kernel),
        _ => Err(PyValueError::new_err(format!(
            "target must be 'curie-weiss' or 'kernel', got {s:?}"
        ))),
    }
}

fn parse_method(s: &str) -> PyResult<MixMethod> {
    match s {
        "exact" => Ok(MixMethod::ExactProjected),
        "montecarlo" => Ok(MixMethod::MonteCarlo),
        _ => Err(PyValueError::new_err(format!(
            "method must be 'exact' or 'montecarlo', got {s:?}"
        ))),
    }
}

fn parse_start(s: &str) -> PyResult<Start> {
    match s {
        "plus" => Ok(Start::AllPlus),
        "minus" => Ok(Start::AllMinus),
        _ => s
            .strip_prefix("sum:")
            .and_then(|k| k.parse().ok())
            .map(Start::Magnetization)
            .ok_or_else(|| PyValueError::new_err(format!("bad start {s:?}"))),
    }
}

#[pyclass(name = "ModelParams", frozen)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    fn new(p: u32, beta: f64, h: f64) -> PyResult<Self> {
        Ok(Self {
            inner: params(p, beta, h)?,
        })
    }

    #[getter]
    fn p(&self) -> u32 {
        self.inner.p
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn h(&self) -> f64 {
        self.inner.h
    }

    /// `H(x)`, `lambda(x)` and their first three derivatives.
    fn evaluate(&self, py: Python<'_>, x: f64) -> PyResult<Py<PyAny>> {
        let v = potential::evaluate_potential(&self.inner, x).map_err(err)?;
        to_py(py, &v)
    }

    fn stationary_points(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let pts = potential::find_stationary_points(&self.inner, &RootFindOpts::default())
            .map_err(err)?;
        to_py(py, &pts)
    }

    fn classify(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let r =
            phase_geometry::classify_point(&self.inner, &RootFindOpts::default()).map_err(err)?;
        to_py(py, &r)
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(p={}, beta={}, h={})",
            self.inner.p, self.inner.beta, self.inner.h
        )
    }
}

#[pyfunction]
fn classify(py: Python<'_>, p: u32, beta: f64, h: f64) -> PyResult<Py<PyAny>> {
    let r = phase_geometry::classify_point(&params(p, beta, h)?, &RootFindOpts::default())
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
fn thresholds(py: Python<'_>, p: u32) -> PyResult<Py<PyAny>> {
    to_py(py, &phase_geometry::thresholds(p).map_err(err)?)
}

#[pyfunction]
fn boundary_curves(py: Python<'_>, p: u32, beta: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &phase_geometry::boundary_curves(p, beta).map_err(err)?)
}

#[pyfunction]
fn drift(p: u32, beta: f64, h: f64, n: usize, c: f64) -> PyResult<f64> {
    potential::drift_field(&params(p, beta, h)?, n, c).map_err(err)
}

/// Curie-Weiss or kernel law of the magnetization sum, as `N + 1` probabilities
/// indexed by the number of plus spins.
#[pyfunction]
#[pyo3(signature = (p, beta, h, n, target = "curie-weiss"))]
fn stationary_law(p: u32, beta: f64, h: f64, n: usize, target: &str) -> PyResult<Vec<f64>> {
    let law = parse_target(target)?
        .law(&params(p, beta, h)?, n)
        .map_err(err)?;
    Ok(law.probs)
}

#[pyfunction]
#[pyo3(signature = (p, beta, h, n, eps = 0.35, cap = 10_000, method = "exact", replicas = 10_000, seed = 0, target = "curie-weiss"))]
#[allow(clippy::too_many_arguments)]
fn mixing_time(
    py: Python<'_>,
    p: u32,
    beta: f64,
    h: f64,
    n: usize,
    eps: f64,
    cap: u64,
    method: &str,
    replicas: usize,
    seed: u64,
    target: &str,
) -> PyResult<Py<PyAny>> {
    let pr = params(p, beta, h)?;
    let method = parse_method(method)?;
    let opts = MixOptions {
        replicas,
        stride: None,
        seed,
        target: parse_target(target)?,
    };
    let r = py
        .detach(|| mix::mixing_time_with(&pr, n, eps, cap, method, &opts))
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (p, beta, h, n, eps = 0.35, cap = 10_000, threshold = None, target = "curie-weiss"))]
#[allow(clippy::too_many_arguments)]
fn restricted_mixing_time(
    py: Python<'_>,
    p: u32,
    beta: f64,
    h: f64,
    n: usize,
    eps: f64,
    cap: u64,
    threshold: Option<i64>,
    target: &str,
) -> PyResult<Py<PyAny>> {
    let pr = params(p, beta, h)?;
    let target = parse_target(target)?;
    let r = py
        .detach(|| {
            let thr = match threshold {
                Some(k) => k,
                None => dynamics::restricted_threshold(&pr, n)?,
            };
            mix::restricted_mixing_time_at(&pr, n, eps, cap, thr, target)
        })
        .map_err(err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (p, beta, h, n, target = "curie-weiss"))]
fn bottleneck(
    py: Python<'_>,
    p: u32,
    beta: f64,
    h: f64,
    n: usize,
    target: &str,
) -> PyResult<Py<PyAny>> {
    let r = mix::bottleneck_with(&params(p, beta, h)?, n, parse_target(target)?).map_err(err)?;
    to_py(py, &r)
}

/// Returns `(spins, report)` for one draw of the metastable sampler.
#[pyfunction]
#[pyo3(signature = (p, beta, h, n, epsilon = None, burn_steps = None, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn metastable_sample(
    py: Python<'_>,
    p: u32,
    beta: f64,
    h: f64,
    n: usize,
    epsilon: Option<f64>,
    burn_steps: Option<u64>,
    seed: u64,
) -> PyResult<(Vec<i8>, Py<PyAny>)> {
    let spec = MetastableSpec {
        params: params(p, beta, h)?,
        n,
        epsilon,
        burn_steps,
        seed,
    };
    let (state, report) = py
        .detach(|| dynamics::metastable_sample(&spec))
        .map_err(err)?;
    Ok((state.spins().to_vec(), to_py(py, &report)?))
}

/// Runs one Glauber chain and returns its magnetization trace.
#[pyfunction]
#[pyo3(signature = (p, beta, h, n, steps, start = "plus", seed = 0, record_every = 1, restricted = None))]
#[allow(clippy::too_many_arguments)]
fn run_chain(
    py: Python<'_>,
    p: u32,
    beta: f64,
    h: f64,
    n: usize,
    steps: u64,
    start: &str,
    seed: u64,
    record_every: u64,
    restricted: Option<i64>,
) -> PyResult<Py<PyAny>> {
    let spec = RunSpec {
        params: params(p, beta, h)?,
        n,
        start: parse_start(start)?,
        steps,
        seed,
        record_every,
        restricted,
    };
    let (trace, _) = py.detach(|| dynamics::run_chain(&spec)).map_err(err)?;
    to_py(py, &trace)
}

#[pymodule]
fn cwglauber_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CwglauberError", m.py().get_type::<CwglauberError>())?;
    m.add("SCHEMA_VERSION", cwglauber::report::SCHEMA_VERSION)?;
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(thresholds, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_curves, m)?)?;
    m.add_function(wrap_pyfunction!(drift, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_law, m)?)?;
    m.add_function(wrap_pyfunction!(mixing_time, m)?)?;
    m.add_function(wrap_pyfunction!(restricted_mixing_time, m)?)?;
    m.add_function(wrap_pyfunction!(bottleneck, m)?)?;
    m.add_function(wrap_pyfunction!(metastable_sample, m)?)?;
    m.add_function(wrap_pyfunction!(run_chain, m)?)?;
    Ok(())
}
