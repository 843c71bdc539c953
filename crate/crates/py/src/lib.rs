//! Python bindings: `import qqse`.
//!
//! Structured results (reports, recommendations, query rows) cross the
//! boundary as plain dicts and lists, via JSON.

use std::collections::BTreeSet;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use qqse_core::catalog::{self, Catalog as CoreCatalog, Corpus as CoreCorpus};
use qqse_core::embeddings::{load_embeddings, EmbeddingTable as CoreTable};
use qqse_core::model::{self, HyperParams, ModelWeights, QuestionRanker};
use qqse_core::ranking::{self, RankedList};
use qqse_core::recommend::{self, ScoredRanking, SERVING_THRESHOLD};
use qqse_core::{serve, synthetic, Scorer};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py(py: Python<'_>, value: &impl Serialize) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(value_err)
}

/// The clarification question catalog.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Catalog(CoreCatalog);

#[pymethods]
impl Catalog {
    /// The built-in 16 questions.
    #[new]
    fn new() -> Self {
        Self(CoreCatalog::shipped())
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        CoreCatalog::from_json_str(text).map(Self).map_err(value_err)
    }

    fn questions(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.questions())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Word vectors, keyed by token.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct EmbeddingTable(Arc<CoreTable>);

#[pymethods]
impl EmbeddingTable {
    /// Reads a GloVe-style text file.
    #[staticmethod]
    #[pyo3(signature = (path, dimension=None))]
    fn load(path: &str, dimension: Option<usize>) -> PyResult<Self> {
        load_embeddings(path, dimension).map(|t| Self(Arc::new(t))).map_err(value_err)
    }

    #[staticmethod]
    fn from_dict(vectors: std::collections::BTreeMap<String, Vec<f32>>) -> PyResult<Self> {
        CoreTable::from_entries(vectors).map(|t| Self(Arc::new(t))).map_err(value_err)
    }

    fn to_glove_text(&self) -> String {
        self.0.to_glove_text()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.0.fingerprint().to_string()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.0.contains(token)
    }
}

/// Annotated queries.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Corpus(CoreCorpus);

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        catalog::load_corpus(path).map(Self).map_err(value_err)
    }

    /// Builds a corpus of seed queries from `(id, text, valid_cq_ids)` rows.
    #[staticmethod]
    fn from_seeds(rows: Vec<(String, String, Vec<u8>)>) -> PyResult<Self> {
        let queries = rows.into_iter().map(|(id, text, valid)| qqse_core::AnnotatedQuery::seed(id, &text, valid)).collect();
        CoreCorpus::new(queries).map(Self).map_err(value_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        catalog::save_corpus(&self.0, path).map_err(value_err)
    }

    /// `(train, test)` with `round(fraction * n)` training queries.
    #[pyo3(signature = (train_fraction=0.8, seed=1))]
    fn split(&self, train_fraction: f64, seed: u64) -> PyResult<(Corpus, Corpus)> {
        let (a, b) = catalog::split_corpus(&self.0, train_fraction, seed).map_err(value_err)?;
        Ok((Self(a), Self(b)))
    }

    fn queries(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.queries)
    }

    fn label_count(&self) -> usize {
        self.0.label_count()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// Trained network weights.
#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Model(ModelWeights<f32>);

#[pymethods]
impl Model {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        model::load_model(path).map(Self).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        model::decode_model(data).map(Self).map_err(value_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model::save_model(&self.0, path).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn to_bytes(&self) -> Vec<u8> {
        model::encode_model(&self.0)
    }

    fn hyperparams(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.hyper)
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.0.parameter_count()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.0.fingerprint.clone()
    }

    /// Binds the model to the embeddings it was trained with.
    #[pyo3(signature = (table, catalog=None))]
    fn ranker(&self, table: &EmbeddingTable, catalog: Option<&Catalog>) -> PyResult<Ranker> {
        let catalog = catalog.map_or_else(CoreCatalog::shipped, |c| c.0.clone());
        QuestionRanker::new(self.0.clone(), table.0.clone(), catalog).map(Ranker).map_err(value_err)
    }
}

/// Scores the catalog for live queries.
#[pyclass(frozen)]
struct Ranker(QuestionRanker);

#[pymethods]
impl Ranker {
    /// Sixteen probabilities, index `id - 1`.
    fn scores(&self, query: &str) -> Vec<f64> {
        self.0.predict(&qqse_core::tokenize(query)).0.to_vec()
    }

    /// Question ids from best to worst; ties go to the lower id.
    fn rank(&self, query: &str) -> Vec<u8> {
        RankedList::from_scores(&self.0.predict(&qqse_core::tokenize(query))).to_vec()
    }

    /// The served question as a dict, or None below the threshold.
    #[pyo3(signature = (query, threshold=SERVING_THRESHOLD))]
    fn recommend(&self, py: Python<'_>, query: &str, threshold: f64) -> PyResult<Py<PyAny>> {
        let tokens = qqse_core::tokenize(query);
        if tokens.is_empty() {
            return Ok(py.None());
        }
        let ranking = ScoredRanking::new(self.0.predict(&tokens));
        to_py(py, &recommend::top_recommendation(&ranking, self.0.catalog(), threshold))
    }

    /// MRR, MAP and P@1..3 over a corpus.
    fn evaluate(&self, py: Python<'_>, corpus: &Corpus) -> PyResult<Py<PyAny>> {
        let report = ranking::evaluate(&self.0, &corpus.0, self.0.catalog()).map_err(value_err)?;
        to_py(py, &report)
    }

    #[getter]
    fn name(&self) -> String {
        Scorer::name(&self.0).to_string()
    }
}

/// Trains a model. `hyper` is a dict of overrides on top of `preset`
/// ("default" or "synthetic"). Returns `(model, report)`.
#[pyfunction]
#[pyo3(signature = (corpus, table, hyper=None, preset="default", catalog=None))]
fn train(
    py: Python<'_>,
    corpus: &Corpus,
    table: &EmbeddingTable,
    hyper: Option<&Bound<'_, PyAny>>,
    preset: &str,
    catalog: Option<&Catalog>,
) -> PyResult<(Model, Py<PyAny>)> {
    let base = match preset {
        "default" => HyperParams::default(),
        "synthetic" => synthetic::synthetic_hyper(),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    let hp = match hyper {
        Some(overrides) => {
            let mut merged = serde_json::to_value(&base).map_err(value_err)?;
            let extra: serde_json::Map<String, serde_json::Value> = from_py(py, overrides)?;
            for (k, v) in extra {
                merged[k] = v;
            }
            serde_json::from_value(merged).map_err(value_err)?
        }
        None => base,
    };
    let catalog = catalog.map_or_else(CoreCatalog::shipped, |c| c.0.clone());
    let (corpus, table) = (corpus.0.clone(), table.0.clone());
    let (weights, report) = py.detach(move || model::train(&corpus, &catalog, &table, &hp)).map_err(value_err)?;
    Ok((Model(weights), to_py(py, &report)?))
}

/// A seeded synthetic `(corpus, table)` pair with known structure.
#[pyfunction]
#[pyo3(signature = (queries=200, seed=7))]
fn synthetic_data(queries: usize, seed: u64) -> (Corpus, EmbeddingTable) {
    let config = synthetic::SyntheticConfig { queries, seed, ..Default::default() };
    let data = synthetic::generate(&CoreCatalog::shipped(), &config);
    (Corpus(data.corpus), EmbeddingTable(Arc::new(data.table)))
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    qqse_core::tokenize(text)
}

#[pyfunction]
fn reformulate(query: &str, answer: &str) -> PyResult<String> {
    recommend::reformulate(&qqse_core::tokenize(query), answer).map(|t| t.join(" ")).map_err(value_err)
}

fn relevant_set(ids: Vec<u8>) -> BTreeSet<u8> {
    ids.into_iter().collect()
}

#[pyfunction]
fn reciprocal_rank(ranked: Vec<u8>, relevant: Vec<u8>) -> f64 {
    ranking::reciprocal_rank(&ranked, &relevant_set(relevant))
}

#[pyfunction]
fn average_precision(ranked: Vec<u8>, relevant: Vec<u8>) -> f64 {
    ranking::average_precision(&ranked, &relevant_set(relevant))
}

#[pyfunction]
fn precision_at_k(ranked: Vec<u8>, relevant: Vec<u8>, k: usize) -> PyResult<f64> {
    ranking::precision_at_k(&ranked, &relevant_set(relevant), k).map_err(value_err)
}

/// Tallies of a feedback log, plus relevance and usefulness rates.
#[pyfunction]
fn feedback_summary(py: Python<'_>, path: &str) -> PyResult<Py<PyAny>> {
    let s = serve::feedback_summary(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
    let mut value = serde_json::to_value(s).map_err(value_err)?;
    value["relevance_rate"] = s.relevance_rate().into();
    value["usefulness_rate"] = s.usefulness_rate().into();
    to_py(py, &value)
}

#[pymodule]
pub fn qqse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Catalog>()?;
    m.add_class::<EmbeddingTable>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<Model>()?;
    m.add_class::<Ranker>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_data, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(reformulate, m)?)?;
    m.add_function(wrap_pyfunction!(reciprocal_rank, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(precision_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(feedback_summary, m)?)?;
    m.add("SERVING_THRESHOLD", SERVING_THRESHOLD)?;
    m.add("NUM_QUESTIONS", qqse_core::NUM_QUESTIONS)?;
    Ok(())
}
