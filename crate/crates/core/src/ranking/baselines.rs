//! Simple baselines: random, embedding similarity / dissimilarity and the
//! query-only ablation of the neural ranker.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RankingError, ScoreVector, Scorer};
use crate::catalog::{Catalog, Corpus};
use crate::embeddings::{average_embedding, cosine_similarity, EmbeddingTable};
use crate::model::{train, HyperParams, ModelError, QuestionRanker, TrainReport};
use crate::NUM_QUESTIONS;

/// The simple baselines, in report row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Random,
    Similar05,
    Similar07,
    Dissimilar05,
    Dissimilar03,
    QueryOnly,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 6] = [
        BaselineKind::Random,
        BaselineKind::Similar05,
        BaselineKind::Similar07,
        BaselineKind::Dissimilar05,
        BaselineKind::Dissimilar03,
        BaselineKind::QueryOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::Random => "Random",
            BaselineKind::Similar05 => "Similar Emb. (δ ≥ 0.5)",
            BaselineKind::Similar07 => "Similar Emb. (δ ≥ 0.7)",
            BaselineKind::Dissimilar05 => "Dissimilar Emb. (δ ≤ 0.5)",
            BaselineKind::Dissimilar03 => "Dissimilar Emb. (δ ≤ 0.3)",
            BaselineKind::QueryOnly => "Query Only",
        }
    }

    /// CLI spelling.
    pub fn key(self) -> &'static str {
        match self {
            BaselineKind::Random => "random",
            BaselineKind::Similar05 => "similar-0.5",
            BaselineKind::Similar07 => "similar-0.7",
            BaselineKind::Dissimilar05 => "dissimilar-0.5",
            BaselineKind::Dissimilar03 => "dissimilar-0.3",
            BaselineKind::QueryOnly => "query-only",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    /// Mode and threshold for the embedding baselines.
    pub fn embedding_params(self) -> Option<(EmbeddingMode, f64)> {
        match self {
            BaselineKind::Similar05 => Some((EmbeddingMode::Similar, 0.5)),
            BaselineKind::Similar07 => Some((EmbeddingMode::Similar, 0.7)),
            BaselineKind::Dissimilar05 => Some((EmbeddingMode::Dissimilar, 0.5)),
            BaselineKind::Dissimilar03 => Some((EmbeddingMode::Dissimilar, 0.3)),
            _ => None,
        }
    }
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingMode {
    /// Positive when `δ >= threshold`; ranks by `δ`.
    Similar,
    /// Positive when `δ <= threshold`; ranks by `-δ`.
    Dissimilar,
}

/// Cosine between the averaged query embedding and the sum of the averaged
/// question and averaged answer embeddings.
#[derive(Debug, Clone)]
pub struct SimilarEmbeddingScorer {
    name: String,
    table: Arc<EmbeddingTable>,
    mode: EmbeddingMode,
    threshold: f64,
    question_vectors: Vec<Vec<f64>>,
}

impl SimilarEmbeddingScorer {
    pub fn new(table: Arc<EmbeddingTable>, catalog: &Catalog, mode: EmbeddingMode, threshold: f64) -> Self {
        let question_vectors = catalog
            .iter()
            .map(|cq| {
                let q = average_embedding(&table, &cq.question_tokens());
                let a = average_embedding(&table, &cq.answer_tokens());
                q.iter().zip(&a).map(|(x, y)| x + y).collect()
            })
            .collect();
        let op = match mode {
            EmbeddingMode::Similar => "≥",
            EmbeddingMode::Dissimilar => "≤",
        };
        let name = match mode {
            EmbeddingMode::Similar => format!("Similar Emb. (δ {op} {threshold})"),
            EmbeddingMode::Dissimilar => format!("Dissimilar Emb. (δ {op} {threshold})"),
        };
        Self { name, table, mode, threshold, question_vectors }
    }

    pub fn for_kind(table: Arc<EmbeddingTable>, catalog: &Catalog, kind: BaselineKind) -> Option<Self> {
        let (mode, threshold) = kind.embedding_params()?;
        Some(Self::new(table, catalog, mode, threshold).with_name(kind.name()))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `δ_j` for each question id.
    pub fn similarities(&self, query: &[String]) -> ScoreVector {
        let qv = average_embedding(&self.table, query);
        ScoreVector(std::array::from_fn(|c| {
            cosine_similarity(&qv, &self.question_vectors[c]).expect("vectors share the table width")
        }))
    }

    /// Binary decisions under the threshold.
    pub fn classify(&self, query: &[String]) -> [bool; NUM_QUESTIONS] {
        let d = self.similarities(query);
        d.0.map(|x| match self.mode {
            EmbeddingMode::Similar => x >= self.threshold,
            EmbeddingMode::Dissimilar => x <= self.threshold,
        })
    }
}

impl Scorer for SimilarEmbeddingScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn scores(&self, query: &[String]) -> Result<ScoreVector, RankingError> {
        let d = self.similarities(query);
        Ok(match self.mode {
            EmbeddingMode::Similar => d,
            EmbeddingMode::Dissimilar => d.map(|x| -x),
        })
    }
}

/// Seeded coin flips (classification) and uniform scores (ranking), a pure
/// function of `(seed, query)`.
#[derive(Debug, Clone)]
pub struct RandomScorer {
    seed: u64,
}

impl RandomScorer {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn rng(&self, query: &[String], stream: u64) -> ChaCha8Rng {
        // FNV-1a over the tokens keeps the draw independent of call order
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for t in query {
            for b in t.bytes().chain([0xff]) {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        rng.set_stream(stream);
        rng
    }

    pub fn classify(&self, query: &[String]) -> [bool; NUM_QUESTIONS] {
        let mut rng = self.rng(query, 1);
        std::array::from_fn(|_| rng.random_bool(0.5))
    }
}

impl Scorer for RandomScorer {
    fn name(&self) -> &str {
        BaselineKind::Random.name()
    }

    fn scores(&self, query: &[String]) -> Result<ScoreVector, RankingError> {
        let mut rng = self.rng(query, 0);
        Ok(ScoreVector(std::array::from_fn(|_| rng.random::<f64>())))
    }
}

/// Trains the ablation that sees only the query and a one-hot question id.
pub fn query_only_variant(
    corpus: &Corpus,
    catalog: &Catalog,
    table: Arc<EmbeddingTable>,
    hyper: &HyperParams,
) -> Result<(QuestionRanker, TrainReport), ModelError> {
    let hp = hyper.clone().query_only();
    let (weights, report) = train(corpus, catalog, &table, &hp)?;
    let ranker = QuestionRanker::new(weights, table, catalog.clone())?.with_name(BaselineKind::QueryOnly.name());
    Ok((ranker, report))
}
