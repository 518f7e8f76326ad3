//! Python bindings: boxes and projections, both engines, graph checks, and
//! the experiment runner.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use oda_core::domain::{ActionBox, BlockMap};
use oda_core::engine::DualAveragingEngine;
use oda_core::graph::{self, DigraphSchedule, GraphSpec, ReversiblePair};
use oda_core::objective::{Objective, QuadraticLoss};
use oda_core::sim::{self, noise_rng, trace_csv, Experiment, GaussianSampler};
use oda_core::{regret, Error, OdaCEngine, OdaPsEngine};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

create_exception!(
    oda,
    ValidationError,
    PyValueError,
    "A graph or weight matrix failed validation."
);
create_exception!(
    oda,
    InvariantError,
    PyException,
    "A guaranteed invariant was violated at runtime."
);

fn err(e: Error) -> PyErr {
    match e {
        Error::Validation(report) => ValidationError::new_err(report.to_string()),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Invariant(m) => InvariantError::new_err(m),
        e @ Error::NonConvergence { .. } => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py>(py: Python<'py>, v: impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let value = serde_json::to_value(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &value)
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DMatrix<f64>> {
    let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
    if rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err("matrix rows have different lengths"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

fn block_map(blocks: Option<Vec<Vec<usize>>>, n: usize) -> PyResult<BlockMap> {
    match blocks {
        Some(b) => BlockMap::new(b).map_err(err),
        None => Ok(BlockMap::scalar(n)),
    }
}

/// Product of closed intervals `[lo_k, hi_k]`.
#[pyclass(name = "ActionBox", frozen, from_py_object)]
#[derive(Clone)]
struct PyActionBox {
    inner: ActionBox,
}

#[pymethods]
impl PyActionBox {
    #[new]
    fn new(lo: Vec<f64>, hi: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: ActionBox::new(lo, hi).map_err(err)?,
        })
    }

    #[staticmethod]
    fn uniform(p: usize, lo: f64, hi: f64) -> PyResult<Self> {
        Ok(Self {
            inner: ActionBox::uniform(p, lo, hi).map_err(err)?,
        })
    }

    #[getter]
    fn lo(&self) -> Vec<f64> {
        self.inner.lo().to_vec()
    }

    #[getter]
    fn hi(&self) -> Vec<f64> {
        self.inner.hi().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn diameter(&self) -> f64 {
        self.inner.diameter()
    }

    /// `argmin_x <z, x> + ||x||^2 / (2 alpha)` over the box.
    fn project(&self, z: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
        let x = oda_core::prox::project(&DVector::from_vec(z), alpha, &self.inner).map_err(err)?;
        Ok(vector(&x))
    }

    #[pyo3(signature = (x, tol = 0.0))]
    fn contains(&self, x: Vec<f64>, tol: f64) -> bool {
        x.len() == self.inner.dim() && self.inner.contains(&DVector::from_vec(x), tol)
    }

    fn __repr__(&self) -> String {
        format!("ActionBox(lo={:?}, hi={:?})", self.inner.lo(), self.inner.hi())
    }
}

fn sensing_gradient(x: &DVector<f64>, a: &DMatrix<f64>, q: &DVector<f64>) -> PyResult<DVector<f64>> {
    let f = QuadraticLoss::new(a.clone(), q.clone()).map_err(err)?;
    if f.dim() != x.len() {
        return Err(PyValueError::new_err(format!(
            "A has {} columns, point has {}",
            f.dim(),
            x.len()
        )));
    }
    Ok(f.gradient(x))
}

macro_rules! engine_methods {
    ($ty:ty, { $($extra:tt)* }) => {
        #[pymethods]
        impl $ty {
            $($extra)*

            /// Applies the network update `u` and maps duals to primals with step `alpha`.
            fn step(&mut self, u: Vec<f64>, alpha: f64) -> PyResult<()> {
                self.inner.step(&DVector::from_vec(u), alpha).map_err(err)
            }

            /// Network update for `f(x) = 1/2 ||A x - q||^2`: each agent's block of
            /// the gradient at its own iterate.
            fn local_updates(&self, a: Vec<Vec<f64>>, q: Vec<f64>) -> PyResult<Vec<f64>> {
                let f = QuadraticLoss::new(matrix(a)?, DVector::from_vec(q)).map_err(err)?;
                Ok(vector(&self.inner.local_updates(&f).map_err(err)?))
            }

            /// Gradient of `1/2 ||A x - q||^2` at `x`.
            #[staticmethod]
            fn quadratic_gradient(x: Vec<f64>, a: Vec<Vec<f64>>, q: Vec<f64>) -> PyResult<Vec<f64>> {
                Ok(vector(&sensing_gradient(&DVector::from_vec(x), &matrix(a)?, &DVector::from_vec(q))?))
            }

            #[getter]
            fn network_action(&self) -> PyResult<Vec<f64>> {
                Ok(vector(&self.inner.network_action().map_err(err)?.x))
            }

            #[getter]
            fn duals(&self) -> Vec<Vec<f64>> {
                self.inner.states().iter().map(|s| vector(&s.z)).collect()
            }

            #[getter]
            fn primals(&self) -> Vec<Vec<f64>> {
                self.inner.states().iter().map(|s| vector(&s.x)).collect()
            }

            /// Running sum of all updates applied so far.
            #[getter]
            fn mean_field(&self) -> Vec<f64> {
                vector(self.inner.mean_field())
            }

            #[getter]
            fn round(&self) -> usize {
                self.inner.round()
            }

            #[getter]
            fn disagreement(&self) -> f64 {
                self.inner.disagreement()
            }

            /// Largest mean-field residual seen after any step.
            #[getter]
            fn mean_field_residual(&self) -> f64 {
                self.inner.mean_field_residual()
            }
        }
    };
}

/// Dual averaging with a reversible weight pair `(r, M)` on a fixed graph.
#[pyclass(name = "CirculationEngine")]
struct PyOdaC {
    inner: OdaCEngine,
}

engine_methods!(PyOdaC, {
    #[new]
    #[pyo3(signature = (r, m, bounds, alpha0 = 1.0, blocks = None))]
    fn new(
        r: Vec<f64>,
        m: Vec<Vec<f64>>,
        bounds: PyActionBox,
        alpha0: f64,
        blocks: Option<Vec<Vec<usize>>>,
    ) -> PyResult<Self> {
        let n = r.len();
        let pair = ReversiblePair::new(DVector::from_vec(r), matrix(m)?).map_err(err)?;
        let blocks = block_map(blocks, n)?;
        Ok(Self {
            inner: OdaCEngine::new(pair, bounds.inner, blocks, alpha0).map_err(err)?,
        })
    }

    /// Lazy Metropolis weights on the `n`-cycle.
    #[staticmethod]
    #[pyo3(signature = (n, bounds, alpha0 = 1.0))]
    fn cycle(n: usize, bounds: PyActionBox, alpha0: f64) -> PyResult<Self> {
        let pair = ReversiblePair::lazy_metropolis(&graph::UndirectedGraph::cycle(n));
        Ok(Self {
            inner: OdaCEngine::new(pair, bounds.inner, BlockMap::scalar(n), alpha0).map_err(err)?,
        })
    }
});

/// Push-sum dual averaging over a digraph schedule. Self-loops are added to every graph.
#[pyclass(name = "PushSumEngine")]
struct PyOdaPs {
    inner: OdaPsEngine,
}

engine_methods!(PyOdaPs, {
    #[new]
    #[pyo3(signature = (n, graphs, bounds, alpha0 = 1.0, periodic = true, blocks = None))]
    fn new(
        n: usize,
        graphs: Vec<Vec<(usize, usize)>>,
        bounds: PyActionBox,
        alpha0: f64,
        periodic: bool,
        blocks: Option<Vec<Vec<usize>>>,
    ) -> PyResult<Self> {
        let lists = DigraphSchedule::with_self_loops(n, graphs);
        let schedule = if periodic {
            DigraphSchedule::periodic(n, lists)
        } else {
            DigraphSchedule::explicit(n, lists)
        }
        .map_err(err)?;
        let blocks = block_map(blocks, n)?;
        Ok(Self {
            inner: OdaPsEngine::new(schedule, bounds.inner, blocks, alpha0).map_err(err)?,
        })
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        vector(&self.inner.weights())
    }

    /// Largest deviation of the recursive duals from their unrolled product form.
    fn unrolled_dual_check(&self) -> PyResult<f64> {
        self.inner.unrolled_dual_check().map_err(err)
    }
});

/// `1 - sigma_2^2` for a reversible pair.
#[pyfunction]
fn spectral_gap(r: Vec<f64>, m: Vec<Vec<f64>>) -> PyResult<f64> {
    let pair = ReversiblePair::new(DVector::from_vec(r), matrix(m)?).map_err(err)?;
    graph::spectral_gap(&pair).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (n, b, regular = false, sigma2 = None))]
fn contraction_constants(
    py: Python<'_>,
    n: usize,
    b: usize,
    regular: bool,
    sigma2: Option<f64>,
) -> PyResult<Bound<'_, PyAny>> {
    serialize(py, graph::contraction_constants(n, b, regular, sigma2).map_err(err)?)
}

/// Validates a graph description given as a JSON string.
#[pyfunction]
fn validate_graph<'py>(py: Python<'py>, spec: &str) -> PyResult<Bound<'py, PyAny>> {
    let spec = GraphSpec::from_json(spec).map_err(err)?;
    let topology = spec.build().map_err(err)?;
    serialize(py, graph::validate_topology(&topology, spec.regular, spec.sigma2, 1e-9))
}

/// Minimizes `sum_t 1/2 ||A_t y - q_t||^2` over the box; returns `(y, value)`.
#[pyfunction]
#[pyo3(signature = (objectives, bounds, tol = 1e-10))]
fn offline_comparator(
    objectives: Vec<(Vec<Vec<f64>>, Vec<f64>)>,
    bounds: PyActionBox,
    tol: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let fs = objectives
        .into_iter()
        .map(|(a, q)| QuadraticLoss::new(matrix(a)?, DVector::from_vec(q)).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let refs: Vec<&dyn Objective> = fs.iter().map(|f| f as &dyn Objective).collect();
    let c = regret::offline_comparator(&refs, &bounds.inner, tol).map_err(err)?;
    Ok((vector(&c.point), c.value))
}

/// `count` draws of `N(0, cov)` from a seeded stream.
#[pyfunction]
#[pyo3(signature = (cov, seed, count = 1))]
fn gaussian_noise(cov: Vec<Vec<f64>>, seed: u64, count: usize) -> PyResult<Vec<Vec<f64>>> {
    let mut sampler = GaussianSampler::new(&matrix(cov)?).map_err(err)?;
    let mut rng = noise_rng(seed);
    Ok((0..count).map(|_| vector(&sampler.sample(&mut rng))).collect())
}

fn load(path: PathBuf, seed: Option<u64>, horizon: Option<usize>) -> PyResult<Experiment> {
    let mut exp = Experiment::load(&path).map_err(err)?;
    if let Some(s) = seed {
        exp = exp.with_seed(s);
    }
    if let Some(t) = horizon {
        exp = exp.with_horizon(t);
    }
    Ok(exp)
}

/// Runs an experiment config file. Returns a summary dict; `trace_csv` holds
/// the per-round trace.
#[pyfunction]
#[pyo3(signature = (config, seed = None, horizon = None))]
fn run(py: Python<'_>, config: PathBuf, seed: Option<u64>, horizon: Option<usize>) -> PyResult<Bound<'_, PyDict>> {
    let exp = load(config, seed, horizon)?;
    let r = py.detach(|| sim::run(&exp)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("algorithm", serialize(py, r.algorithm)?)?;
    out.set_item("T", r.trace.horizon())?;
    out.set_item("regret", r.trace.regret)?;
    out.set_item("avg_regret", r.trace.avg_regret())?;
    out.set_item("theory_bound", r.theory_bound())?;
    out.set_item("lipschitz", r.certificate.lipschitz)?;
    out.set_item("smoothness", r.certificate.smoothness)?;
    out.set_item("invariants", serialize(py, &r.invariants)?)?;
    out.set_item("invariants_passed", r.invariants.passed())?;
    out.set_item("comparator", r.trace.comparator.as_ref().map(|c| vector(&c.point)))?;
    out.set_item(
        "actions",
        r.trace.rounds.iter().map(|x| vector(&x.action)).collect::<Vec<_>>(),
    )?;
    out.set_item("trace_csv", trace_csv(&r.trace))?;
    Ok(out)
}

/// Fresh run per horizon (or prefixes of one run with `cumulative`).
#[pyfunction]
#[pyo3(signature = (config, horizons, cumulative = false, seed = None))]
fn sweep(
    py: Python<'_>,
    config: PathBuf,
    horizons: Vec<usize>,
    cumulative: bool,
    seed: Option<u64>,
) -> PyResult<Bound<'_, PyAny>> {
    let exp = load(config, seed, None)?;
    let rows = py.detach(|| sim::sweep(&exp, &horizons, cumulative)).map_err(err)?;
    serialize(py, rows)
}

#[pymodule]
fn oda(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyActionBox>()?;
    m.add_class::<PyOdaC>()?;
    m.add_class::<PyOdaPs>()?;
    m.add_function(wrap_pyfunction!(spectral_gap, m)?)?;
    m.add_function(wrap_pyfunction!(contraction_constants, m)?)?;
    m.add_function(wrap_pyfunction!(validate_graph, m)?)?;
    m.add_function(wrap_pyfunction!(offline_comparator, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_noise, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add("ValidationError", m.py().get_type::<ValidationError>())?;
    m.add("InvariantError", m.py().get_type::<InvariantError>())?;
    Ok(())
}
