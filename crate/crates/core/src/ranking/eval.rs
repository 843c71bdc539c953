use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{average_precision, precision_at_k, reciprocal_rank};
use super::{RankingError, Scorer};
use crate::catalog::{Catalog, Corpus};

/// Retrieval metrics of one scorer over one test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scorer: String,
    pub mrr: f64,
    pub map: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub n: usize,
    #[serde(skip, default)]
    pub queries_without_relevant: usize,
}

impl EvalReport {
    pub fn metrics(&self) -> [f64; 5] {
        [self.mrr, self.map, self.p1, self.p2, self.p3]
    }
}

/// Published rows (MRR, MAP, P@1, P@2, P@3), in table order.
pub const PUBLISHED_RESULTS: [(&str, [f64; 5]); 9] = [
    ("QueryQuestions-SE", [0.88, 0.77, 0.80, 0.67, 0.57]),
    ("Random", [0.54, 0.43, 0.43, 0.28, 0.22]),
    ("Similar Emb. (δ ≥ 0.5)", [0.68, 0.55, 0.60, 0.42, 0.32]),
    ("Similar Emb. (δ ≥ 0.7)", [0.67, 0.54, 0.59, 0.41, 0.31]),
    ("Dissimilar Emb. (δ ≤ 0.5)", [0.53, 0.45, 0.31, 0.33, 0.31]),
    ("Dissimilar Emb. (δ ≤ 0.3)", [0.56, 0.44, 0.45, 0.30, 0.23]),
    ("Query Only", [0.56, 0.48, 0.41, 0.31, 0.27]),
    ("LambdaRank", [0.80, 0.57, 0.70, 0.45, 0.36]),
    ("XGBoost", [0.79, 0.56, 0.71, 0.45, 0.35]),
];

/// Scores every query (in parallel) and averages the five metrics.
///
/// Per-query values are summed in corpus order, so the report does not
/// depend on scheduling.
pub fn evaluate(scorer: &dyn Scorer, corpus: &Corpus, _catalog: &Catalog) -> Result<EvalReport, RankingError> {
    if corpus.queries.is_empty() {
        return Err(RankingError::EmptyQuerySet);
    }
    let rows = corpus
        .queries
        .par_iter()
        .map(|q| {
            let ranked = scorer.rank(&q.tokens)?;
            let rel = &q.valid_cq_ids;
            Ok([
                reciprocal_rank(&ranked, rel),
                average_precision(&ranked, rel),
                precision_at_k(&ranked, rel, 1)?,
                precision_at_k(&ranked, rel, 2)?,
                precision_at_k(&ranked, rel, 3)?,
            ])
        })
        .collect::<Result<Vec<[f64; 5]>, RankingError>>()?;

    let mut sums = [0.0; 5];
    for row in &rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = rows.len();
    let m = sums.map(|s| s / n as f64);
    Ok(EvalReport {
        scorer: scorer.name().to_string(),
        mrr: m[0],
        map: m[1],
        p1: m[2],
        p2: m[3],
        p3: m[4],
        n,
        queries_without_relevant: corpus.queries.iter().filter(|q| q.valid_cq_ids.is_empty()).count(),
    })
}

fn table_position(name: &str) -> usize {
    PUBLISHED_RESULTS.iter().position(|(n, _)| *n == name).unwrap_or(PUBLISHED_RESULTS.len())
}

/// Aligned plain-text table; known scorers follow the published row order,
/// anything else comes last in the given order.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut rows: Vec<&EvalReport> = reports.iter().collect();
    rows.sort_by_key(|r| table_position(&r.scorer));
    let width = rows.iter().map(|r| r.scorer.chars().count()).max().unwrap_or(0).max("Scorer".len());

    let mut out = String::new();
    let pad = |s: &str| format!("{s}{}", " ".repeat(width - s.chars().count()));
    let _ = writeln!(out, "{}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}", pad("Scorer"), "MRR", "MAP", "P@1", "P@2", "P@3", "n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6}",
            pad(&r.scorer),
            r.mrr,
            r.map,
            r.p1,
            r.p2,
            r.p3,
            r.n
        );
    }
    out
}
