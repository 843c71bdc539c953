//! Serving-time policy: rank the catalog for a live query, apply the 0.5
//! threshold and append a chosen answer to the query.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::embeddings::EmbeddingTable;
use crate::model::{predict_scores, ModelError, ModelWeights};
use crate::ranking::{RankedList, ScoreVector};
use crate::tokenize::tokenize;

/// Scores at or above this value are shown to the user.
pub const SERVING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RecommendError {
    #[error("answer is empty")]
    EmptyAnswer,
}

/// A question worth showing, with its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub cq_id: u8,
    pub question: String,
    pub answers: Vec<String>,
    pub score: f64,
}

/// Ranked ids alongside the scores they were ranked by.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRanking {
    pub ranked: RankedList,
    pub scores: ScoreVector,
}

impl ScoredRanking {
    pub fn new(scores: ScoreVector) -> Self {
        Self { ranked: RankedList::from_scores(&scores), scores }
    }

    /// `(id, score)` pairs from best to worst.
    pub fn iter(&self) -> impl Iterator<Item = (u8, f64)> + '_ {
        self.ranked.iter().map(|&id| (id, self.scores.get(id)))
    }
}

pub fn rank_questions(
    weights: &ModelWeights<f32>,
    table: &EmbeddingTable,
    catalog: &Catalog,
    query: &[String],
) -> Result<ScoredRanking, ModelError> {
    predict_scores(weights, table, catalog, query).map(ScoredRanking::new)
}

/// The best question if its score reaches `threshold`.
pub fn top_recommendation(ranking: &ScoredRanking, catalog: &Catalog, threshold: f64) -> Option<Recommendation> {
    let (id, score) = ranking.iter().next()?;
    if score < threshold {
        return None;
    }
    let cq = catalog.get(id)?;
    Some(Recommendation { cq_id: id, question: cq.text.clone(), answers: cq.common_answers.clone(), score })
}

/// Appends the tokenized answer to the query.
pub fn reformulate(query: &[String], answer: &str) -> Result<Vec<String>, RecommendError> {
    let extra = tokenize(answer);
    if extra.is_empty() {
        return Err(RecommendError::EmptyAnswer);
    }
    Ok(query.iter().cloned().chain(extra).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(f: impl FnMut(u8) -> f64) -> ScoredRanking {
        ScoredRanking::new(ScoreVector::from_fn(f))
    }

    #[test]
    fn best_question_first() {
        let r = scores(|id| if id == 3 { 0.9 } else { 0.1 });
        assert_eq!(r.ranked[0], 3);
        let r = scores(|id| if id == 2 || id == 5 { 0.7 } else { 0.1 });
        assert_eq!(&r.ranked[..2], &[2, 5]);
    }

    #[test]
    fn threshold_rule() {
        let catalog = Catalog::shipped();
        assert_eq!(top_recommendation(&scores(|_| 0.4), &catalog, SERVING_THRESHOLD), None);

        let r = scores(|id| if id == 1 { 0.9 } else { 0.2 });
        let rec = top_recommendation(&r, &catalog, SERVING_THRESHOLD).unwrap();
        assert_eq!((rec.cq_id, rec.score), (1, 0.9));
        assert_eq!(rec.question, catalog.get(1).unwrap().text);

        let r = scores(|id| if id == 10 { 0.5 } else { 0.2 });
        assert_eq!(top_recommendation(&r, &catalog, SERVING_THRESHOLD).unwrap().cq_id, 10);
    }

    #[test]
    fn reformulation_appends() {
        let q = tokenize("java mail api");
        assert_eq!(reformulate(&q, "documentation").unwrap().join(" "), "java mail api documentation");
        let q = tokenize("http vs grpc");
        assert_eq!(reformulate(&q, "performance").unwrap().join(" "), "http vs grpc performance");
        let q = tokenize("java eclipse download");
        assert_eq!(reformulate(&q, "Mac OS").unwrap().join(" "), "java eclipse download mac os");
        assert_eq!(reformulate(&tokenize("java"), "  "), Err(RecommendError::EmptyAnswer));
    }

    proptest! {
        #[test]
        fn none_iff_max_below_threshold(s in proptest::array::uniform16(0.0f64..1.0), t in 0.0f64..1.0) {
            let r = ScoredRanking::new(ScoreVector(s));
            let rec = top_recommendation(&r, &Catalog::shipped(), t);
            prop_assert_eq!(rec.is_none(), r.scores.max() < t);
        }

        #[test]
        fn reformulation_keeps_the_prefix(q in "[a-z]{1,6}( [a-z]{1,6}){0,4}", a in "[a-zA-Z]{1,8}") {
            let q = tokenize(&q);
            let out = reformulate(&q, &a).unwrap();
            prop_assert!(out.len() > q.len());
            prop_assert_eq!(&out[..q.len()], &q[..]);
        }
    }
}
