//! Clarification question recommendation for software developers' web search
//! queries.
//!
//! The crate ships the 16-question catalog, loads annotated query corpora,
//! grows them through masked-term augmentation, trains a three-branch neural
//! ranker (query CNN, question BiLSTM, answers CNN), evaluates it against
//! simple baselines with MRR / MAP / P@K, and serves recommendations over HTTP.

pub mod augment;
pub mod catalog;
pub mod embeddings;
pub mod model;
pub mod ranking;
pub mod recommend;
pub mod serve;
pub mod synthetic;
pub mod tokenize;

pub use catalog::{AnnotatedQuery, CatalogError, ClarificationQuestion, Corpus, Origin, Triplet};
pub use embeddings::{EmbeddingError, EmbeddingTable, SequenceMatrix};
pub use model::{HyperParams, ModelError, ModelWeights, TrainReport};
pub use ranking::{EvalReport, RankedList, ScoreVector, Scorer};
pub use recommend::Recommendation;
pub use tokenize::tokenize;

/// Number of questions in the catalog.
pub const NUM_QUESTIONS: usize = 16;

/// Floating-point type the network is generic over: `f32` for training and
/// serving, `f64` for gradient checking.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + std::iter::Sum
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::fmt::Debug
    + Default
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}
