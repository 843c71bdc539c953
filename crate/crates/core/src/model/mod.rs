//! The three-branch clarification question ranker: a CNN over the query, a
//! BiLSTM over the question text and a CNN over the question's common
//! answers, merged by a dense head with a sigmoid output.

mod hyper;
mod io;
mod layers;
pub mod network;
mod optim;
mod predict;
mod train;
mod weights;

use thiserror::Error;

pub use hyper::{Architecture, HyperParams};
pub use io::{decode_model, encode_model, load_model, save_model, MAGIC};
pub use layers::{BiLstmBranch, CnnBranch, Dense, LstmDirection};
pub use network::{
    backward, backward_into, bce_loss, encode_query, encode_question, forward, forward_encoded, QuestionInput, Trace,
    TripletInput,
};
pub use optim::AdamState;
pub use predict::{predict_scores, QuestionRanker};
pub use train::{train, train_generic, train_with_options, validation_size, EpochStats, TrainOptions, TrainReport};
pub use weights::{init_weights, ModelWeights};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperParams(String),
    #[error("model was trained against embeddings {model}, but the loaded table is {table}")]
    FingerprintMismatch { model: String, table: String },
    #[error("embedding dimension mismatch: model {model}, table {table}")]
    DimensionMismatch { model: usize, table: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{0} sequence is empty")]
    EmptySequence(&'static str),
    #[error("non-finite gradient in parameter block {0}")]
    NonFiniteGradient(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error(transparent)]
    Catalog(#[from] crate::catalog::CatalogError),
    #[error("unsupported model file version {0}")]
    VersionMismatch(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("model file checksum error: {0}")]
    Checksum(String),
    #[error(transparent)]
    Io(std::io::Error),
}
