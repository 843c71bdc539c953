//! Evaluation harness: ranked lists, MRR / MAP / P@K, simple baselines and
//! report rendering.

mod baselines;
mod eval;
pub mod metrics;

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{query_only_variant, BaselineKind, EmbeddingMode, RandomScorer, SimilarEmbeddingScorer};
pub use eval::{evaluate, render_table, EvalReport, PUBLISHED_RESULTS};
pub use metrics::{average_precision, mean_average_precision, mrr, precision_at_k, reciprocal_rank};

use crate::model::ModelError;
use crate::NUM_QUESTIONS;

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("no queries to aggregate")]
    EmptyQuerySet,
    #[error("K = {0} outside 1..=16")]
    KOutOfRange(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One score per catalog question, stored at index `id - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector(pub [f64; NUM_QUESTIONS]);

impl ScoreVector {
    pub fn from_fn(mut f: impl FnMut(u8) -> f64) -> Self {
        Self(std::array::from_fn(|i| f(i as u8 + 1)))
    }

    /// Score of question `id` (1..=16).
    pub fn get(&self, id: u8) -> f64 {
        self.0[id as usize - 1]
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self(self.0.map(f))
    }
}

/// The 16 question ids by descending score, ties broken by ascending id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankedList([u8; NUM_QUESTIONS]);

impl RankedList {
    pub fn from_scores(scores: &ScoreVector) -> Self {
        let mut ids: [u8; NUM_QUESTIONS] = std::array::from_fn(|i| i as u8 + 1);
        ids.sort_by(|&a, &b| {
            scores
                .get(b)
                .partial_cmp(&scores.get(a))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        Self(ids)
    }

    /// Wraps an explicit permutation of 1..=16.
    pub fn from_ids(ids: [u8; NUM_QUESTIONS]) -> Option<Self> {
        let mut seen = [false; NUM_QUESTIONS];
        for &id in &ids {
            let i = (id as usize).checked_sub(1).filter(|&i| i < NUM_QUESTIONS)?;
            if std::mem::replace(&mut seen[i], true) {
                return None;
            }
        }
        Some(Self(ids))
    }

    pub fn ids(&self) -> &[u8; NUM_QUESTIONS] {
        &self.0
    }
}

impl Deref for RankedList {
    type Target = [u8];
    fn deref(&self) -> &[u8] {
        &self.0
    }
}

/// Anything that scores the 16 catalog questions for a query.
pub trait Scorer: Sync {
    fn name(&self) -> &str;
    fn scores(&self, query: &[String]) -> Result<ScoreVector, RankingError>;

    fn rank(&self, query: &[String]) -> Result<RankedList, RankingError> {
        self.scores(query).map(|s| RankedList::from_scores(&s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_ascending_id() {
        let s = ScoreVector::from_fn(|id| match id {
            2 | 5 => 0.7,
            3 => 0.9,
            _ => 0.1,
        });
        let r = RankedList::from_scores(&s);
        assert_eq!(&r[..4], &[3, 2, 5, 1]);
        let flat = RankedList::from_scores(&ScoreVector([0.5; 16]));
        assert!(flat.iter().copied().eq(1..=16));
    }

    #[test]
    fn from_ids_checks_permutation() {
        let mut ids: [u8; 16] = std::array::from_fn(|i| 16 - i as u8);
        assert!(RankedList::from_ids(ids).is_some());
        ids[0] = 1;
        assert!(RankedList::from_ids(ids).is_none());
        ids[0] = 0;
        assert!(RankedList::from_ids(ids).is_none());
    }

    proptest! {
        #[test]
        fn ranking_is_a_permutation_invariant_under_monotone_maps(scores in proptest::array::uniform16(-5.0f64..5.0)) {
            let s = ScoreVector(scores);
            let r = RankedList::from_scores(&s);
            let mut sorted = *r.ids();
            sorted.sort();
            prop_assert!(sorted.iter().copied().eq(1..=16));
            prop_assert_eq!(RankedList::from_scores(&s.map(|x| 2.0 * x + 1.0)), r);
            prop_assert_eq!(RankedList::from_scores(&s.map(f64::exp)), r);
            for w in r.windows(2) {
                prop_assert!(s.get(w[0]) > s.get(w[1]) || (s.get(w[0]) == s.get(w[1]) && w[0] < w[1]));
            }
        }
    }
}
