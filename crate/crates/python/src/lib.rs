//! Python bindings for the retrieval, rollout and evaluation primitives.
//!
//! Structured values (trajectories, reports, cluster models) cross the boundary as
//! JSON strings; use `json.loads` on the Python side.

use std::collections::BTreeMap;

use framesearch_core::eval::{self, PredictionRecord, QaInstance};
use framesearch_core::index::{self, Bm25Params, ClusterModel, ImageEntry, Payload, ScoredRecord, TextChunk, Vector};
use framesearch_core::msr1::{self, Action, RewardScheme, RewardWeights, Trajectory};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn hits(records: Vec<ScoredRecord>) -> Vec<(String, f64)> {
    records.into_iter().map(|r| (r.id().to_string(), r.score)).collect()
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    index::tokenize(text)
}

/// Okapi BM25 over `(chunk_id, title, content)` rows.
#[pyclass(module = "framesearch")]
struct Bm25Index {
    inner: index::Bm25Index,
}

#[pymethods]
impl Bm25Index {
    #[new]
    #[pyo3(signature = (docs, k1 = 1.2, b = 0.75))]
    fn new(docs: Vec<(String, String, String)>, k1: f64, b: f64) -> PyResult<Self> {
        let chunks = docs
            .into_iter()
            .map(|(chunk_id, title, content)| TextChunk { chunk_id, title, content })
            .collect();
        let params = Bm25Params::new(k1, b).map_err(value_err)?;
        let inner = index::Bm25Index::build(chunks, params).map_err(value_err)?;
        Ok(Self { inner })
    }

    /// Top-`k` `(chunk_id, score)` pairs; documents sharing no term are omitted.
    fn search(&self, query: &str, k: usize) -> PyResult<Vec<(String, f64)>> {
        self.inner.search(query, k).map(hits).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Exact cosine search over `(id, vector)` rows.
#[pyclass(module = "framesearch")]
struct DenseIndex {
    inner: index::DenseIndex,
}

#[pymethods]
impl DenseIndex {
    #[new]
    fn new(rows: Vec<(String, Vec<f64>)>) -> PyResult<Self> {
        let dim = rows.first().map_or(0, |(_, v)| v.len());
        let entries = rows
            .into_iter()
            .map(|(id, v)| {
                let payload = Payload::Image(ImageEntry { pid: id, img: String::new(), query: String::new(), game: String::new() });
                Vector::new(v).map(|v| (payload, v))
            })
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        let inner = index::DenseIndex::build(dim, entries).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn search(&self, query: Vec<f64>, k: usize) -> PyResult<Vec<(String, f64)>> {
        self.inner.search(&query, k).map(hits).map_err(value_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Cluster labels for `points` under seeded k-means++.
#[pyfunction]
fn kmeans_pp(points: Vec<Vec<f64>>, k: usize, seed: u64) -> PyResult<Vec<usize>> {
    let vs = points.into_iter().map(Vector::new).collect::<Result<Vec<_>, _>>().map_err(value_err)?;
    Ok(index::kmeans_pp(&vs, k, seed).map_err(value_err)?.assignments)
}

/// Fits per-element clusters from `{element: [(image, vector), ...]}`; returns JSON models.
#[pyfunction]
#[pyo3(signature = (images, seed = 0))]
fn fit_clusters(images: BTreeMap<String, Vec<(String, Vec<f64>)>>, seed: u64) -> PyResult<String> {
    let mut models = Vec::new();
    for (element, rows) in images {
        let rows = rows
            .into_iter()
            .map(|(img, v)| Vector::new(v).map(|v| (img, v)))
            .collect::<Result<Vec<_>, _>>()
            .map_err(value_err)?;
        models.push(ClusterModel::fit(element, rows, seed).map_err(value_err)?);
    }
    serde_json::to_string(&models).map_err(value_err)
}

/// One positive pair per eligible element for `epoch`, as a JSON list.
#[pyfunction]
fn sample_positive_pairs(models_json: &str, epoch: u64) -> PyResult<String> {
    let models: Vec<ClusterModel> = serde_json::from_str(models_json).map_err(value_err)?;
    let by_id: BTreeMap<String, ClusterModel> = models.into_iter().map(|m| (m.element_id.clone(), m)).collect();
    serde_json::to_string(&index::sample_positive_pairs(&by_id, epoch)).map_err(value_err)
}

/// `(kind, payload)` where kind is answer, image_search, text_search or invalid.
#[pyfunction]
fn parse_action(text: &str) -> (String, Option<String>) {
    let action = msr1::parse_action(text);
    let payload = match &action {
        Action::Answer(s) | Action::TextSearch(s) => Some(s.clone()),
        Action::ImageSearch | Action::Invalid => None,
    };
    (action.kind().to_string(), payload)
}

#[pyfunction]
fn extract_answer(text: &str) -> String {
    msr1::extract_answer(text)
}

#[pyfunction]
fn normalize_advantages(rewards: Vec<f64>) -> PyResult<Vec<f64>> {
    msr1::normalize_advantages(&rewards).map_err(PyValueError::new_err)
}

/// Reward breakdown for a JSON trajectory, returned as JSON.
#[pyfunction]
#[pyo3(signature = (trajectory_json, gold, options, scheme = "original"))]
fn compute_reward(trajectory_json: &str, gold: &str, options: Vec<String>, scheme: &str) -> PyResult<String> {
    let traj: Trajectory = serde_json::from_str(trajectory_json).map_err(value_err)?;
    let scheme: RewardScheme = scheme.parse().map_err(PyValueError::new_err)?;
    let r = msr1::compute_reward(&traj, gold, &options, scheme, &RewardWeights::default())
        .map_err(PyValueError::new_err)?;
    serde_json::to_string(&r).map_err(value_err)
}

/// Index of the option an answer selects, if any.
#[pyfunction]
fn match_answer(text: &str, options: Vec<String>) -> Option<usize> {
    eval::match_answer(text, &options)
}

/// Scores JSONL predictions against a JSONL dataset; returns the report as JSON.
#[pyfunction]
fn score_run(setting: &str, predictions_jsonl: &str, dataset_jsonl: &str) -> PyResult<String> {
    let instances: Vec<QaInstance> = eval::parse_dataset(dataset_jsonl).map_err(value_err)?;
    let preds = predictions_jsonl
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str::<PredictionRecord>)
        .collect::<Result<Vec<_>, _>>()
        .map_err(value_err)?;
    let report = eval::score_run(setting, &preds, &instances).map_err(value_err)?;
    serde_json::to_string(&report).map_err(value_err)
}

#[pymodule]
fn framesearch(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Bm25Index>()?;
    m.add_class::<DenseIndex>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans_pp, m)?)?;
    m.add_function(wrap_pyfunction!(fit_clusters, m)?)?;
    m.add_function(wrap_pyfunction!(sample_positive_pairs, m)?)?;
    m.add_function(wrap_pyfunction!(parse_action, m)?)?;
    m.add_function(wrap_pyfunction!(extract_answer, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_advantages, m)?)?;
    m.add_function(wrap_pyfunction!(compute_reward, m)?)?;
    m.add_function(wrap_pyfunction!(match_answer, m)?)?;
    m.add_function(wrap_pyfunction!(score_run, m)?)?;
    Ok(())
}
