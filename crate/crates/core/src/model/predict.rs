use std::sync::Arc;

use super::network::{check_table, encode_query, forward, head_forward, query_forward, question_forward};
use super::train::encode_catalog;
use super::{ModelError, ModelWeights};
use crate::catalog::Catalog;
use crate::embeddings::EmbeddingTable;
use crate::ranking::{RankingError, ScoreVector, Scorer};
use crate::NUM_QUESTIONS;

/// One forward pass per catalog question; scores indexed by question id.
pub fn predict_scores(
    weights: &ModelWeights<f32>,
    table: &EmbeddingTable,
    catalog: &Catalog,
    query: &[String],
) -> Result<ScoreVector, ModelError> {
    check_table(weights, table)?;
    let mut out = [0.0; NUM_QUESTIONS];
    for cq in catalog {
        let (p, _) = forward(weights, table, query, cq)?;
        out[cq.id as usize - 1] = p as f64;
    }
    Ok(ScoreVector(out))
}

/// A loaded model bound to its embeddings and catalog, with the question
/// branches precomputed. Scoring a query then costs one query-branch pass
/// plus sixteen head evaluations, and gives the same bits as
/// [`predict_scores`].
#[derive(Debug, Clone)]
pub struct QuestionRanker {
    name: String,
    weights: Arc<ModelWeights<f32>>,
    table: Arc<EmbeddingTable>,
    catalog: Catalog,
    question_features: Vec<Vec<f32>>,
}

impl QuestionRanker {
    pub fn new(weights: ModelWeights<f32>, table: Arc<EmbeddingTable>, catalog: Catalog) -> Result<Self, ModelError> {
        check_table(&weights, &table)?;
        let inputs = encode_catalog(&weights, &table, &catalog);
        let question_features = inputs
            .iter()
            .map(|q| question_forward(&weights, q).map(|f| f.features))
            .collect::<Result<_, _>>()?;
        Ok(Self { name: "QueryQuestions-SE".into(), weights: Arc::new(weights), table, catalog, question_features })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn predict(&self, query: &[String]) -> ScoreVector {
        let q = encode_query(&self.weights, &self.table, query);
        let (qf, _) = query_forward(&self.weights, &q);
        ScoreVector(std::array::from_fn(|c| {
            head_forward(&self.weights, &qf, &self.question_features[c]).probability as f64
        }))
    }

    pub fn weights(&self) -> &ModelWeights<f32> {
        &self.weights
    }

    pub fn table(&self) -> &Arc<EmbeddingTable> {
        &self.table
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }
}

impl Scorer for QuestionRanker {
    fn name(&self) -> &str {
        &self.name
    }

    fn scores(&self, query: &[String]) -> Result<ScoreVector, RankingError> {
        Ok(self.predict(query))
    }
}
