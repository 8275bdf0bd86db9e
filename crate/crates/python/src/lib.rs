//! Python bindings: graphs, simulation, EM inference, bounds, and the
//! experiment runner.

use std::collections::HashMap;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use truthbound::experiments::{self, ExperimentConfig};
use truthbound::{
    BipartiteGraph, EmConfig, GraphModel, ItemPosterior, Label, LabelPosterior, PriorParams,
    ReviewSamples,
};

fn to_py(e: truthbound::Error) -> PyErr {
    match e {
        truthbound::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn label_from_sign(s: i64) -> PyResult<Label> {
    Label::from_sign(s).ok_or_else(|| PyValueError::new_err(format!("label must be 1 or -1, got {s}")))
}

#[pyclass(name = "Prior", module = "pytruthbound", frozen)]
struct PyPrior(PriorParams);

#[pymethods]
impl PyPrior {
    #[new]
    #[pyo3(signature = (alpha=4.0, beta=2.0))]
    fn new(alpha: f64, beta: f64) -> PyResult<Self> {
        PriorParams::new(alpha, beta).map(Self).map_err(to_py)
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean()
    }

    #[getter]
    fn mode(&self) -> f64 {
        self.0.mode()
    }

    fn __repr__(&self) -> String {
        format!("Prior(alpha={}, beta={})", self.0.alpha(), self.0.beta())
    }
}

#[pyclass(name = "Graph", module = "pytruthbound", frozen)]
struct PyGraph(BipartiteGraph);

#[pymethods]
impl PyGraph {
    /// Generate a graph; `model` is "rnd", "ipa" or "ripa".
    #[staticmethod]
    #[pyo3(signature = (model, reviewers, edges, seed=0, items=None))]
    fn generate(model: &str, reviewers: usize, edges: usize, seed: u64, items: Option<usize>) -> PyResult<Self> {
        let model: GraphModel = model.parse().map_err(to_py)?;
        truthbound::generate_graph(model, reviewers, items.unwrap_or(reviewers), edges, seed)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn from_edges(reviewers: usize, items: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        BipartiteGraph::new(reviewers, items, edges).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        BipartiteGraph::load(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    #[getter]
    fn num_reviewers(&self) -> usize {
        self.0.num_reviewers()
    }

    #[getter]
    fn num_items(&self) -> usize {
        self.0.num_items()
    }

    #[getter]
    fn num_edges(&self) -> usize {
        self.0.num_edges()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges().iter().map(|(u, i)| (u.0, i.0)).collect()
    }

    fn degree_sequences(&self) -> (Vec<usize>, Vec<usize>) {
        self.0.degree_sequences()
    }

    fn __len__(&self) -> usize {
        self.0.num_edges()
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(reviewers={}, items={}, edges={})",
            self.0.num_reviewers(),
            self.0.num_items(),
            self.0.num_edges()
        )
    }
}

#[pyclass(name = "GroundTruth", module = "pytruthbound", frozen)]
struct PyGroundTruth(truthbound::GroundTruth);

#[pymethods]
impl PyGroundTruth {
    #[new]
    fn new(theta: Vec<f64>, labels: Vec<i64>) -> PyResult<Self> {
        let labels = labels.into_iter().map(label_from_sign).collect::<PyResult<_>>()?;
        truthbound::GroundTruth::new(theta, labels).map(Self).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (graph, prior, seed=0))]
    fn sample(graph: &PyGraph, prior: &PyPrior, seed: u64) -> PyResult<Self> {
        truthbound::sample_ground_truth(&graph.0, &prior.0, seed)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        truthbound::GroundTruth::load(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.0.theta.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<i8> {
        self.0.labels.iter().map(|z| z.sign()).collect()
    }
}

#[pyclass(name = "Reviews", module = "pytruthbound", frozen)]
struct PyReviews(ReviewSamples);

#[pymethods]
impl PyReviews {
    /// Draw `n` reviews along uniformly chosen edges.
    #[staticmethod]
    #[pyo3(signature = (graph, truth, n, seed=0))]
    fn generate(graph: &PyGraph, truth: &PyGroundTruth, n: u64, seed: u64) -> PyResult<Self> {
        truthbound::generate_reviews(&graph.0, &truth.0, n, seed)
            .map(Self)
            .map_err(to_py)
    }

    /// Build from `{(reviewer, item): (n_plus, n_minus)}`.
    #[staticmethod]
    fn from_counts(counts: HashMap<(usize, usize), (u64, u64)>) -> Self {
        Self(ReviewSamples::from_counts(counts.into_iter().map(|((u, i), (plus, minus))| {
            (
                (truthbound::ReviewerId(u), truthbound::ItemId(i)),
                truthbound::EdgeCounts { plus, minus },
            )
        })))
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ReviewSamples::load(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> u64 {
        self.0.n()
    }

    fn counts(&self) -> HashMap<(usize, usize), (u64, u64)> {
        self.0
            .counts()
            .iter()
            .map(|((u, i), c)| ((u.0, i.0), (c.plus, c.minus)))
            .collect()
    }
}

#[pyclass(name = "EmEstimate", module = "pytruthbound", frozen, get_all)]
struct PyEmEstimate {
    theta_hat: Vec<f64>,
    mu_plus: Vec<f64>,
    mu_minus: Vec<f64>,
    iterations: usize,
    converged: bool,
    delta_trace: Vec<f64>,
}

#[pymethods]
impl PyEmEstimate {
    /// Item labels by the mu(+1) >= 0.5 rule.
    fn labels(&self) -> Vec<i8> {
        truthbound::classify_items(&posterior(&self.mu_plus, &self.mu_minus))
            .iter()
            .map(|z| z.sign())
            .collect()
    }
}

fn posterior(plus: &[f64], minus: &[f64]) -> LabelPosterior {
    LabelPosterior(
        plus.iter()
            .zip(minus)
            .map(|(&plus, &minus)| ItemPosterior { plus, minus })
            .collect(),
    )
}

fn em_config(prior: &PyPrior, label_prior_plus: f64, tolerance: f64, max_iterations: usize) -> EmConfig {
    EmConfig {
        label_prior_plus,
        tolerance,
        max_iterations,
        ..EmConfig::new(prior.0)
    }
}

#[pyfunction]
#[pyo3(signature = (graph, reviews, prior, tolerance=1e-8, max_iterations=500, label_prior_plus=0.5))]
fn run_em(
    py: Python<'_>,
    graph: &PyGraph,
    reviews: &PyReviews,
    prior: &PyPrior,
    tolerance: f64,
    max_iterations: usize,
    label_prior_plus: f64,
) -> PyResult<PyEmEstimate> {
    let cfg = em_config(prior, label_prior_plus, tolerance, max_iterations);
    let est = py
        .detach(|| truthbound::run_em(&graph.0, &reviews.0, &cfg))
        .map_err(to_py)?;
    Ok(PyEmEstimate {
        mu_plus: est.posterior.items().iter().map(|m| m.plus).collect(),
        mu_minus: est.posterior.items().iter().map(|m| m.minus).collect(),
        theta_hat: est.theta_hat,
        iterations: est.iterations,
        converged: est.converged,
        delta_trace: est.delta_trace,
    })
}

/// Returns a list of (mu_plus, mu_minus) per item.
#[pyfunction]
#[pyo3(signature = (graph, reviews, theta, prior, label_prior_plus=0.5))]
fn e_step(
    graph: &PyGraph,
    reviews: &PyReviews,
    theta: Vec<f64>,
    prior: &PyPrior,
    label_prior_plus: f64,
) -> PyResult<Vec<(f64, f64)>> {
    let cfg = em_config(prior, label_prior_plus, 1e-8, 500);
    let mu = truthbound::e_step(&graph.0, &reviews.0, &theta, &cfg).map_err(to_py)?;
    Ok(mu.items().iter().map(|m| (m.plus, m.minus)).collect())
}

#[pyfunction]
fn m_step(graph: &PyGraph, reviews: &PyReviews, mu: Vec<(f64, f64)>, prior: &PyPrior) -> PyResult<Vec<f64>> {
    let (plus, minus): (Vec<f64>, Vec<f64>) = mu.into_iter().unzip();
    truthbound::m_step(&graph.0, &reviews.0, &posterior(&plus, &minus), &EmConfig::new(prior.0)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (graph, reviews, theta, prior, label_prior_plus=0.5))]
fn exact_log_posterior(
    graph: &PyGraph,
    reviews: &PyReviews,
    theta: Vec<f64>,
    prior: &PyPrior,
    label_prior_plus: f64,
) -> PyResult<f64> {
    let cfg = em_config(prior, label_prior_plus, 1e-8, 500);
    truthbound::exact_log_posterior(&graph.0, &reviews.0, &theta, &cfg).map_err(to_py)
}

#[pyfunction]
fn observed_information(theta_hat: Vec<f64>, prior: &PyPrior) -> PyResult<Vec<f64>> {
    truthbound::observed_information(&theta_hat, &prior.0)
        .map(|info| info.diagonal().to_vec())
        .map_err(to_py)
}

#[pyfunction]
fn theta_star(prior: &PyPrior) -> f64 {
    truthbound::theta_star(&prior.0)
}

/// Returns a dict with `information`, `mse_lower`, `rmse_lower` and
/// `mean_rmse_lower`.
#[pyfunction]
fn bcrlb_report<'py>(py: Python<'py>, theta_hat: Vec<f64>, prior: &PyPrior) -> PyResult<Bound<'py, PyAny>> {
    let info = truthbound::observed_information(&theta_hat, &prior.0).map_err(to_py)?;
    let report = truthbound::bcrlb_report(&info).map_err(to_py)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("information", info.diagonal().to_vec())?;
    out.set_item("mse_lower", report.mse_lower)?;
    out.set_item("rmse_lower", report.rmse_lower)?;
    out.set_item("mean_rmse_lower", report.mean_rmse_lower)?;
    Ok(out.into_any())
}

#[pyfunction]
fn accuracy(predicted: Vec<i64>, truth: Vec<i64>) -> PyResult<f64> {
    let p = predicted.into_iter().map(label_from_sign).collect::<PyResult<Vec<_>>>()?;
    let t = truth.into_iter().map(label_from_sign).collect::<PyResult<Vec<_>>>()?;
    truthbound::accuracy(&p, &t).map_err(to_py)
}

#[pyfunction]
fn empirical_rmse(theta_hat: Vec<f64>, truth: &PyGroundTruth) -> PyResult<f64> {
    truthbound::empirical_rmse(&theta_hat, &truth.0).map_err(to_py)
}

/// Run the experiment grid.
///
/// `preset` is "desk" or "paper"; `overrides` uses the same key=value
/// syntax as the CLI config file. Returns `(runs, rows)` as lists of dicts.
/// When `out` is given the aggregated CSV is written there too.
#[pyfunction]
#[pyo3(signature = (preset="desk", overrides="", out=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    preset: &str,
    overrides: &str,
    out: Option<&str>,
) -> PyResult<(Vec<Bound<'py, PyAny>>, Vec<Bound<'py, PyAny>>)> {
    let cfg = ExperimentConfig::preset(preset)
        .and_then(|c| c.with_overrides(overrides))
        .map_err(to_py)?;
    let (results, rows) = py
        .detach(|| {
            let results = experiments::run_experiment(&cfg)?;
            let rows = experiments::aggregate(&results)?;
            Ok::<_, truthbound::Error>((results, rows))
        })
        .map_err(to_py)?;
    if let Some(path) = out {
        experiments::write_csv(&rows, path).map_err(to_py)?;
    }

    let runs = results
        .iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("model", r.model.tag())?;
            d.set_item("edges", r.num_edges)?;
            d.set_item("n", r.n)?;
            d.set_item("repetition", r.repetition)?;
            d.set_item("accuracy", r.accuracy)?;
            d.set_item("mean_rmse_bound", r.mean_rmse_bound)?;
            d.set_item("empirical_rmse", r.empirical_rmse)?;
            d.set_item("em_iterations", r.em_iterations)?;
            d.set_item("converged", r.converged)?;
            Ok(d.into_any())
        })
        .collect::<PyResult<Vec<_>>>()?;
    let rows = rows
        .iter()
        .map(|r| {
            let d = pyo3::types::PyDict::new(py);
            d.set_item("model", r.model.tag())?;
            d.set_item("edges", r.num_edges)?;
            d.set_item("n", r.n)?;
            d.set_item("acc_mean", r.acc_mean)?;
            d.set_item("acc_se", r.acc_se)?;
            d.set_item("rmse_bound_mean", r.rmse_bound_mean)?;
            d.set_item("rmse_bound_se", r.rmse_bound_se)?;
            d.set_item("emp_rmse_mean", r.emp_rmse_mean)?;
            d.set_item("emp_rmse_se", r.emp_rmse_se)?;
            Ok(d.into_any())
        })
        .collect::<PyResult<Vec<_>>>()?;
    Ok((runs, rows))
}

#[pymodule]
fn pytruthbound(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPrior>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyGroundTruth>()?;
    m.add_class::<PyReviews>()?;
    m.add_class::<PyEmEstimate>()?;
    m.add_function(wrap_pyfunction!(run_em, m)?)?;
    m.add_function(wrap_pyfunction!(e_step, m)?)?;
    m.add_function(wrap_pyfunction!(m_step, m)?)?;
    m.add_function(wrap_pyfunction!(exact_log_posterior, m)?)?;
    m.add_function(wrap_pyfunction!(observed_information, m)?)?;
    m.add_function(wrap_pyfunction!(theta_star, m)?)?;
    m.add_function(wrap_pyfunction!(bcrlb_report, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_rmse, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
