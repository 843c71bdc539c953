//! Forward and reverse passes of the full ranker.
//!
//! The forward pass concatenates `[query CNN; question BiLSTM mean; answers
//! CNN]` (or `[query CNN; one-hot question id]` for the query-only variant),
//! applies a ReLU dense layer and a single-unit output layer, and squashes the
//! logit with a sigmoid clamped to `[eps, 1 - eps]`.

use super::hyper::Architecture;
use super::layers::{relu, sigmoid, BiLstmCache, CnnCache};
use super::{ModelError, ModelWeights};
use crate::catalog::ClarificationQuestion;
use crate::embeddings::{embed_sequence, EmbeddingTable, SequenceMatrix};
use crate::{Real, NUM_QUESTIONS};

/// Question-side input of one triplet.
#[derive(Debug, Clone, PartialEq)]
pub enum QuestionInput<T> {
    Text {
        question: SequenceMatrix<T>,
        answers: SequenceMatrix<T>,
    },
    /// Catalog id in 1..=16.
    OneHot(u8),
}

/// Embedded inputs of one (query, question, answers) triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletInput<T> {
    pub query: SequenceMatrix<T>,
    pub question: QuestionInput<T>,
}

/// Question-branch output and what its backward pass needs.
#[derive(Debug, Clone)]
pub struct QuestionFeatures<T> {
    pub features: Vec<T>,
    lstm: Option<BiLstmCache<T>>,
    answers: Option<CnnCache<T>>,
}

#[derive(Debug, Clone)]
pub struct HeadCache<T> {
    concat: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    pub logit: T,
    pub probability: T,
    /// True when the sigmoid output hit the clamp; the gradient is then zero.
    pub clamped: bool,
}

/// Everything [`backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct Trace<T> {
    pub input: TripletInput<T>,
    query_features: Vec<T>,
    query_cache: CnnCache<T>,
    question: QuestionFeatures<T>,
    pub head: HeadCache<T>,
}

impl<T: Real> Trace<T> {
    pub fn probability(&self) -> T {
        self.head.probability
    }
}

pub fn encode_query<T: Real>(weights: &ModelWeights<impl Real>, table: &EmbeddingTable, tokens: &[String]) -> SequenceMatrix<T> {
    embed_sequence(table, tokens, weights.hyper.max_len_query)
}

pub fn encode_question<T: Real>(
    weights: &ModelWeights<impl Real>,
    table: &EmbeddingTable,
    cq: &ClarificationQuestion,
) -> QuestionInput<T> {
    let hp = &weights.hyper;
    match hp.architecture {
        Architecture::Full => QuestionInput::Text {
            question: embed_sequence(table, &cq.question_tokens(), hp.max_len_cq),
            answers: embed_sequence(table, &cq.answer_tokens(), hp.max_len_ans),
        },
        Architecture::QueryOnly => QuestionInput::OneHot(cq.id),
    }
}

pub fn check_table<T>(weights: &ModelWeights<T>, table: &EmbeddingTable) -> Result<(), ModelError> {
    if weights.fingerprint != table.fingerprint() {
        return Err(ModelError::FingerprintMismatch {
            model: weights.fingerprint.clone(),
            table: table.fingerprint().to_string(),
        });
    }
    if weights.embedding_dim != table.dimension() {
        return Err(ModelError::DimensionMismatch { model: weights.embedding_dim, table: table.dimension() });
    }
    Ok(())
}

pub fn query_forward<T: Real>(w: &ModelWeights<T>, query: &SequenceMatrix<T>) -> (Vec<T>, CnnCache<T>) {
    w.query_cnn.forward(query)
}

pub fn question_forward<T: Real>(w: &ModelWeights<T>, input: &QuestionInput<T>) -> Result<QuestionFeatures<T>, ModelError> {
    match (input, &w.cq_lstm, &w.answers_cnn) {
        (QuestionInput::Text { question, answers }, Some(lstm), Some(cnn)) => {
            if question.true_length() == 0 {
                return Err(ModelError::EmptySequence("clarification question"));
            }
            let (mut features, lstm_cache) = lstm.forward(question);
            let (ans, ans_cache) = cnn.forward(answers);
            features.extend(ans);
            Ok(QuestionFeatures { features, lstm: Some(lstm_cache), answers: Some(ans_cache) })
        }
        (QuestionInput::OneHot(id), None, None) => {
            let idx = (*id as usize).checked_sub(1).filter(|&i| i < NUM_QUESTIONS).ok_or(ModelError::Shape(format!("question id {id}")))?;
            let mut features = vec![T::zero(); NUM_QUESTIONS];
            features[idx] = T::one();
            Ok(QuestionFeatures { features, lstm: None, answers: None })
        }
        _ => Err(ModelError::Shape("question input does not match the model architecture".into())),
    }
}

pub fn head_forward<T: Real>(w: &ModelWeights<T>, query_features: &[T], question_features: &[T]) -> HeadCache<T> {
    let mut concat = Vec::with_capacity(query_features.len() + question_features.len());
    concat.extend_from_slice(query_features);
    concat.extend_from_slice(question_features);
    let hidden_pre = w.head_hidden.forward(&concat);
    let hidden: Vec<T> = hidden_pre.iter().map(|&x| relu(x)).collect();
    let logit = w.head_out.forward(&hidden)[0];
    let eps = T::from(w.hyper.probability_clamp_eps).unwrap();
    let raw = sigmoid(logit);
    let probability = raw.max(eps).min(T::one() - eps);
    HeadCache { concat, hidden_pre, hidden, logit, probability, clamped: probability != raw }
}

/// Backpropagates `scale * dBCE/dlogit` through the head. Returns the
/// gradient w.r.t. the concatenated branch features.
pub fn head_backward<T: Real>(w: &ModelWeights<T>, cache: &HeadCache<T>, label: T, scale: T, grads: &mut ModelWeights<T>) -> Vec<T> {
    let dlogit = if cache.clamped { T::zero() } else { (cache.probability - label) * scale };
    let dhidden = w.head_out.backward(&cache.hidden, &[dlogit], &mut grads.head_out);
    let dpre: Vec<T> = dhidden
        .iter()
        .zip(&cache.hidden_pre)
        .map(|(&d, &z)| if z > T::zero() { d } else { T::zero() })
        .collect();
    w.head_hidden.backward(&cache.concat, &dpre, &mut grads.head_hidden)
}

pub fn query_backward<T: Real>(
    w: &ModelWeights<T>,
    query: &SequenceMatrix<T>,
    cache: &CnnCache<T>,
    dfeatures: &[T],
    grads: &mut ModelWeights<T>,
) {
    w.query_cnn.backward(query, cache, dfeatures, &mut grads.query_cnn);
}

pub fn question_backward<T: Real>(
    w: &ModelWeights<T>,
    input: &QuestionInput<T>,
    feats: &QuestionFeatures<T>,
    dfeatures: &[T],
    grads: &mut ModelWeights<T>,
) {
    if let (QuestionInput::Text { question, answers }, Some(lstm), Some(cnn)) = (input, &w.cq_lstm, &w.answers_cnn) {
        let split = 2 * lstm.hidden();
        let (Some(lc), Some(ac)) = (&feats.lstm, &feats.answers) else { return };
        lstm.backward(question, lc, &dfeatures[..split], grads.cq_lstm.as_mut().expect("gradient shape"));
        cnn.backward(answers, ac, &dfeatures[split..], grads.answers_cnn.as_mut().expect("gradient shape"));
    }
}

/// Forward pass over already-embedded inputs.
pub fn forward_encoded<T: Real>(w: &ModelWeights<T>, input: TripletInput<T>) -> Result<(T, Trace<T>), ModelError> {
    if input.query.dim() != w.embedding_dim {
        return Err(ModelError::Shape(format!("query width {} != {}", input.query.dim(), w.embedding_dim)));
    }
    let (query_features, query_cache) = query_forward(w, &input.query);
    let question = question_forward(w, &input.question)?;
    let head = head_forward(w, &query_features, &question.features);
    let p = head.probability;
    Ok((p, Trace { input, query_features, query_cache, question, head }))
}

/// Probability that `cq` is a valid clarification question for `query`.
pub fn forward<T: Real>(
    w: &ModelWeights<T>,
    table: &EmbeddingTable,
    query: &[String],
    cq: &ClarificationQuestion,
) -> Result<(T, Trace<T>), ModelError> {
    check_table(w, table)?;
    let input = TripletInput { query: encode_query(w, table, query), question: encode_question(w, table, cq) };
    forward_encoded(w, input)
}

/// Adds `scale * dBCE/dθ` for one traced triplet into `grads`.
pub fn backward_into<T: Real>(w: &ModelWeights<T>, trace: &Trace<T>, label: T, scale: T, grads: &mut ModelWeights<T>) {
    let dconcat = head_backward(w, &trace.head, label, scale, grads);
    let q = trace.query_features.len();
    query_backward(w, &trace.input.query, &trace.query_cache, &dconcat[..q], grads);
    question_backward(w, &trace.input.question, &trace.question, &dconcat[q..], grads);
}

/// Exact gradients of `bce_loss(forward(..), label)` w.r.t. every parameter.
/// Embeddings are frozen and get no gradient.
pub fn backward<T: Real>(w: &ModelWeights<T>, trace: &Trace<T>, label: T) -> ModelWeights<T> {
    let mut grads = w.zeros_like();
    backward_into(w, trace, label, T::one(), &mut grads);
    grads
}

/// Binary cross-entropy of an already clamped probability.
pub fn bce_loss<T: Real>(p: T, label: T) -> T {
    -(label * p.ln() + (T::one() - label) * (T::one() - p).ln())
}
