//! Python bindings: graphs, the aligner, the perturbation generators, and
//! Hit@k scoring, packaged as the `slotalign_py` extension module.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use slotalign as core;

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Io { .. } | core::Error::SinkhornDidNotConverge { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix_to_rows(m: &ndarray::ArrayView2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let Some(first) = rows.first() else {
        return Err(PyValueError::new_err("the matrix has no rows"));
    };
    let ncols = first.len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("the matrix rows have unequal lengths"));
    }
    Ok(Array2::from_shape_fn((rows.len(), ncols), |(i, j)| rows[i][j]))
}

/// An undirected attributed graph.
#[pyclass(name = "Graph", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: core::Graph,
}

#[pymethods]
impl PyGraph {
    #[new]
    #[pyo3(signature = (n, edges, features=None))]
    fn new(
        n: usize,
        edges: Vec<(usize, usize)>,
        features: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Self> {
        let features = features.as_deref().map(rows_to_matrix).transpose()?;
        let inner = core::Graph::new(n, edges, features).map_err(to_py)?;
        Ok(PyGraph { inner })
    }

    /// Loads a graph from an edge list and an optional feature table.
    #[staticmethod]
    #[pyo3(signature = (edges_path, features_path=None))]
    fn load(edges_path: PathBuf, features_path: Option<PathBuf>) -> PyResult<Self> {
        let inner =
            core::load_graph(&edges_path, features_path.as_deref()).map_err(to_py)?;
        Ok(PyGraph { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.inner.num_edges()
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().to_vec()
    }

    fn features(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.inner.features())
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(n={}, num_edges={}, feature_dim={})",
            self.inner.n(),
            self.inner.num_edges(),
            self.inner.feature_dim()
        )
    }
}

/// The outcome of an alignment run.
#[pyclass(name = "AlignResult")]
struct AlignResult {
    /// The coupling matrix, one row per source node.
    #[pyo3(get)]
    coupling: Vec<Vec<f64>>,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    iterations: usize,
    /// The objective value at the final iterate.
    #[pyo3(get)]
    objective: f64,
    /// Learned mixture weights of the source structure bases.
    #[pyo3(get)]
    beta_s: Vec<f64>,
    /// Learned mixture weights of the target structure bases.
    #[pyo3(get)]
    beta_t: Vec<f64>,
    /// Per-iteration rows (iteration, objective, alpha step, coupling step).
    #[pyo3(get)]
    trace: Vec<(usize, f64, f64, f64)>,
}

#[pymethods]
impl AlignResult {
    fn __repr__(&self) -> String {
        format!(
            "AlignResult(converged={}, iterations={}, objective={})",
            self.converged, self.iterations, self.objective
        )
    }
}

/// Aligns two graphs and returns the coupling with its diagnostics.
#[pyfunction]
#[pyo3(signature = (
    source, target, *, num_bases=2, tau=0.1, eta=0.01, max_outer_iters=500,
    eps_alpha=1e-6, eps_pi=1e-6, init="featsim", freeze_weights=false,
    normalize_features=true,
))]
#[allow(clippy::too_many_arguments)]
fn align(
    source: &PyGraph,
    target: &PyGraph,
    num_bases: usize,
    tau: f64,
    eta: f64,
    max_outer_iters: usize,
    eps_alpha: f64,
    eps_pi: f64,
    init: &str,
    freeze_weights: bool,
    normalize_features: bool,
) -> PyResult<AlignResult> {
    let init = match init {
        "featsim" => core::InitMode::FeatureSimilarity,
        "uniform" => core::InitMode::Uniform,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown init {other:?}, expected \"featsim\" or \"uniform\""
            )))
        }
    };
    let cfg = core::AlignConfig {
        num_bases,
        tau,
        eta,
        max_outer_iters,
        eps_alpha,
        eps_pi,
        init,
        freeze_weights,
        normalize_features,
        ..core::AlignConfig::semi_synthetic()
    };
    let state = core::run(&source.inner, &target.inner, &cfg).map_err(to_py)?;
    Ok(AlignResult {
        coupling: matrix_to_rows(&state.coupling().plan()),
        converged: state.converged(),
        iterations: state.iteration(),
        objective: state
            .trace()
            .last()
            .map(|p| p.objective)
            .unwrap_or(f64::NAN),
        beta_s: state.weights().beta_s().to_vec(),
        beta_t: state.weights().beta_t().to_vec(),
        trace: state
            .trace()
            .iter()
            .map(|p| (p.iteration, p.objective, p.alpha_step, p.pi_step))
            .collect(),
    })
}

/// Relabels the nodes by a seeded permutation; returns the copy and the
/// ground-truth (source, target) anchor pairs.
#[pyfunction]
fn make_target(g: &PyGraph, seed: u64) -> (PyGraph, Vec<(usize, usize)>) {
    let (target, anchors) = core::make_target(&g.inner, seed);
    (PyGraph { inner: target }, anchors.pairs().to_vec())
}

/// Moves a fraction of the edges to previously unconnected node pairs.
#[pyfunction]
fn perturb_edges(g: &PyGraph, ratio: f64, seed: u64) -> PyResult<PyGraph> {
    let inner = core::perturb_edges(&g.inner, ratio, seed).map_err(to_py)?;
    Ok(PyGraph { inner })
}

/// Shuffles a fraction of the feature columns.
#[pyfunction]
fn permute_features(g: &PyGraph, ratio: f64, seed: u64) -> PyResult<PyGraph> {
    let inner = core::permute_features(&g.inner, ratio, seed).map_err(to_py)?;
    Ok(PyGraph { inner })
}

/// Deletes a fraction of the feature columns.
#[pyfunction]
fn truncate_features(g: &PyGraph, ratio: f64, seed: u64) -> PyResult<PyGraph> {
    let inner = core::truncate_features(&g.inner, ratio, seed).map_err(to_py)?;
    Ok(PyGraph { inner })
}

/// Projects the features onto their leading principal components.
#[pyfunction]
fn compress_features(g: &PyGraph, ratio: f64) -> PyResult<PyGraph> {
    let inner = core::compress_features(&g.inner, ratio).map_err(to_py)?;
    Ok(PyGraph { inner })
}

/// Derives an independent stream seed from a base seed.
#[pyfunction]
fn derive_seed(seed: u64, stream: u64) -> u64 {
    core::derive_seed(seed, stream)
}

/// Hit@k of a coupling against ground-truth anchor pairs, as {k: percent}.
#[pyfunction]
fn hit_at_k(
    coupling: Vec<Vec<f64>>,
    anchors: Vec<(usize, usize)>,
    ks: Vec<usize>,
) -> PyResult<BTreeMap<usize, f64>> {
    let scores = rows_to_matrix(&coupling)?;
    let anchors =
        core::AnchorSet::new(anchors, scores.nrows(), scores.ncols()).map_err(to_py)?;
    core::hit_at_k(&scores.view(), &anchors, &ks).map_err(to_py)
}

#[pymodule]
fn slotalign_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<AlignResult>()?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(make_target, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_edges, m)?)?;
    m.add_function(wrap_pyfunction!(permute_features, m)?)?;
    m.add_function(wrap_pyfunction!(truncate_features, m)?)?;
    m.add_function(wrap_pyfunction!(compress_features, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    m.add_function(wrap_pyfunction!(hit_at_k, m)?)?;
    Ok(())
}
