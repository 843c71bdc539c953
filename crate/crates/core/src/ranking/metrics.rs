//! Binary-relevance ranking metrics over question id lists.
//!
//! Queries without any relevant question contribute 0 to RR and AvgP.

use std::collections::BTreeSet;

use super::RankingError;
use crate::NUM_QUESTIONS;

/// `1 / rank` of the first relevant id, or 0.
pub fn reciprocal_rank(ranked: &[u8], relevant: &BTreeSet<u8>) -> f64 {
    ranked
        .iter()
        .position(|id| relevant.contains(id))
        .map_or(0.0, |p| 1.0 / (p + 1) as f64)
}

/// Mean over relevant items of precision at the item's rank.
pub fn average_precision(ranked: &[u8], relevant: &BTreeSet<u8>) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

pub fn precision_at_k(ranked: &[u8], relevant: &BTreeSet<u8>, k: usize) -> Result<f64, RankingError> {
    if k == 0 || k > NUM_QUESTIONS || k > ranked.len() {
        return Err(RankingError::KOutOfRange(k));
    }
    let hits = ranked[..k].iter().filter(|id| relevant.contains(id)).count();
    Ok(hits as f64 / k as f64)
}

fn mean<'a>(
    runs: impl IntoIterator<Item = (&'a [u8], &'a BTreeSet<u8>)>,
    f: impl Fn(&[u8], &BTreeSet<u8>) -> f64,
) -> Result<f64, RankingError> {
    let (mut sum, mut n) = (0.0, 0usize);
    for (ranked, relevant) in runs {
        sum += f(ranked, relevant);
        n += 1;
    }
    if n == 0 {
        return Err(RankingError::EmptyQuerySet);
    }
    Ok(sum / n as f64)
}

pub fn mrr<'a>(runs: impl IntoIterator<Item = (&'a [u8], &'a BTreeSet<u8>)>) -> Result<f64, RankingError> {
    mean(runs, reciprocal_rank)
}

pub fn mean_average_precision<'a>(runs: impl IntoIterator<Item = (&'a [u8], &'a BTreeSet<u8>)>) -> Result<f64, RankingError> {
    mean(runs, average_precision)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranked() -> Vec<u8> {
        (1..=16).collect()
    }

    fn set(ids: &[u8]) -> BTreeSet<u8> {
        ids.iter().copied().collect()
    }

    #[test]
    fn reciprocal_rank_cases() {
        assert_eq!(reciprocal_rank(&ranked(), &set(&[1])), 1.0);
        assert_eq!(reciprocal_rank(&ranked(), &set(&[2, 9])), 0.5);
        assert_eq!(reciprocal_rank(&ranked(), &set(&[])), 0.0);
    }

    #[test]
    fn mrr_cases() {
        let r = ranked();
        let (a, b) = (set(&[1]), set(&[2]));
        assert_eq!(mrr([(&r[..], &a)]).unwrap(), 1.0);
        assert_eq!(mrr([(&r[..], &a), (&r[..], &b)]).unwrap(), 0.75);
        assert!(matches!(mrr(std::iter::empty()), Err(RankingError::EmptyQuerySet)));
        assert!(matches!(mean_average_precision(std::iter::empty()), Err(RankingError::EmptyQuerySet)));
    }

    #[test]
    fn average_precision_cases() {
        assert!((average_precision(&ranked(), &set(&[1, 3])) - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        assert_eq!(average_precision(&ranked(), &set(&[1, 2, 3])), 1.0);
        assert_eq!(average_precision(&ranked(), &set(&[])), 0.0);
    }

    #[test]
    fn precision_cases() {
        assert_eq!(precision_at_k(&ranked(), &set(&[1]), 1).unwrap(), 1.0);
        assert!((precision_at_k(&ranked(), &set(&[1, 3, 9]), 3).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(precision_at_k(&ranked(), &set(&[]), 3).unwrap(), 0.0);
        assert!(matches!(precision_at_k(&ranked(), &set(&[1]), 0), Err(RankingError::KOutOfRange(0))));
        assert!(matches!(precision_at_k(&ranked(), &set(&[1]), 17), Err(RankingError::KOutOfRange(17))));
    }
}
