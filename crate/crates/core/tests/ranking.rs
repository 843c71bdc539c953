mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qqse_core::catalog::Catalog;
use qqse_core::ranking::{
    evaluate, BaselineKind, EmbeddingMode, RandomScorer, RankingError, SimilarEmbeddingScorer,
};
use qqse_core::synthetic::{generate, SyntheticConfig};
use qqse_core::{tokenize, AnnotatedQuery, Corpus, EmbeddingTable, ScoreVector, Scorer};

/// Sixteen one-word questions without answers.
fn toy_catalog() -> Catalog {
    let words = ["alpha", "beta", "gamma"];
    let entries: Vec<String> = (1..=16)
        .map(|id| {
            let text = words.get(id - 1).map(|w| w.to_string()).unwrap_or(format!("other{id}"));
            format!(r#"{{"id": {id}, "text": "{text}", "answers": []}}"#)
        })
        .collect();
    Catalog::from_json_str(&format!("[{}]", entries.join(","))).unwrap()
}

fn toy_table() -> Arc<EmbeddingTable> {
    Arc::new(
        EmbeddingTable::from_entries([
            ("alpha", vec![1.0, 0.0, 0.0]),
            ("beta", vec![0.0, 1.0, 0.0]),
            ("gamma", vec![1.0, 1.0, 0.0]),
        ])
        .unwrap(),
    )
}

#[test]
fn similarity_ranking_follows_hand_computed_cosines() {
    let catalog = toy_catalog();
    let similar = SimilarEmbeddingScorer::new(toy_table(), &catalog, EmbeddingMode::Similar, 0.7);
    let q = tokenize("alpha");
    let d = similar.similarities(&q);
    assert_eq!(d.get(1), 1.0);
    assert_eq!(d.get(2), 0.0);
    assert!((d.get(3) - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!((4..=16).all(|id| d.get(id) == 0.0));

    let mut want: Vec<u8> = vec![1, 3, 2];
    want.extend(4..=16);
    assert_eq!(similar.rank(&q).unwrap().ids().to_vec(), want);
    let positives: Vec<u8> = (1..=16u8).filter(|&id| similar.classify(&q)[id as usize - 1]).collect();
    assert_eq!(positives, [1, 3]);

    let dissimilar = SimilarEmbeddingScorer::new(toy_table(), &catalog, EmbeddingMode::Dissimilar, 0.5);
    let mut want: Vec<u8> = vec![2];
    want.extend(4..=16);
    want.extend([3, 1]);
    assert_eq!(dissimilar.rank(&q).unwrap().ids().to_vec(), want);
    let positives: Vec<u8> = (1..=16u8).filter(|&id| dissimilar.classify(&q)[id as usize - 1]).collect();
    assert_eq!(positives.len(), 14);
    assert!(!positives.contains(&1) && !positives.contains(&3));

    // the query's own question vector
    assert!((similar.similarities(&tokenize("gamma")).get(3) - 1.0).abs() < 1e-12);
}

#[test]
fn random_p_at_1_matches_label_density() {
    let catalog = Catalog::shipped();
    let data = generate(&catalog, &SyntheticConfig { queries: 60, max_valid: 4, ..Default::default() });
    let expected =
        data.corpus.queries.iter().map(|q| q.valid_cq_ids.len() as f64 / 16.0).sum::<f64>() / data.corpus.len() as f64;
    let runs = 300;
    let mean = (0..runs)
        .map(|seed| evaluate(&RandomScorer::new(seed), &data.corpus, &catalog).unwrap().p1)
        .sum::<f64>()
        / runs as f64;
    // 18,000 Bernoulli draws: standard error under 0.004
    assert!((mean - expected).abs() < 0.015, "Monte Carlo {mean} vs expected {expected}");
}

#[test]
fn every_baseline_scores_and_reports() {
    let catalog = Catalog::shipped();
    let data = generate(&catalog, &SyntheticConfig { queries: 40, ..Default::default() });
    let table = Arc::new(data.table);
    for kind in BaselineKind::ALL {
        let Some(s) = SimilarEmbeddingScorer::for_kind(table.clone(), &catalog, kind) else { continue };
        let r = evaluate(&s, &data.corpus, &catalog).unwrap();
        assert_eq!(r.scorer, kind.name());
        assert!(r.metrics().iter().all(|m| (0.0..=1.0).contains(m)));
    }
    // the two similar thresholds only differ in classification, not ranking
    let a = SimilarEmbeddingScorer::for_kind(table.clone(), &catalog, BaselineKind::Similar05).unwrap();
    let b = SimilarEmbeddingScorer::for_kind(table, &catalog, BaselineKind::Similar07).unwrap();
    let (ra, rb) = (evaluate(&a, &data.corpus, &catalog).unwrap(), evaluate(&b, &data.corpus, &catalog).unwrap());
    assert_eq!(ra.metrics(), rb.metrics());
}

struct Fixed(fn(&AnnotatedQuery, u8) -> f64, Corpus);

impl Scorer for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn scores(&self, query: &[String]) -> Result<ScoreVector, RankingError> {
        let q = self.1.queries.iter().find(|q| q.tokens == query).unwrap();
        Ok(ScoreVector::from_fn(|id| (self.0)(q, id)))
    }
}

#[test]
fn monotone_transforms_leave_reports_unchanged() {
    let catalog = Catalog::shipped();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let queries: Vec<AnnotatedQuery> = (0..30)
        .map(|i| {
            let (_, rel) = common::random_fixture(&mut rng);
            let rel: BTreeSet<u8> = if rel.is_empty() { [5].into() } else { rel };
            AnnotatedQuery::seed(format!("q{i}"), &format!("term{i} api"), rel)
        })
        .collect();
    let corpus = Corpus::new(queries).unwrap();
    let base = Fixed(|q, id| (q.id.len() as f64 * 7.3 + id as f64 * 1.7).sin(), corpus.clone());
    let shifted = Fixed(|q, id| 2.0 * ((q.id.len() as f64 * 7.3 + id as f64 * 1.7).sin()) + 1.0, corpus.clone());
    let oracle = Fixed(|q, id| q.valid_cq_ids.contains(&id) as u8 as f64, corpus.clone());
    let (a, b) = (evaluate(&base, &corpus, &catalog).unwrap(), evaluate(&shifted, &corpus, &catalog).unwrap());
    assert_eq!(a.metrics(), b.metrics());
    let o = evaluate(&oracle, &corpus, &catalog).unwrap();
    assert_eq!((o.mrr, o.map, o.p1), (1.0, 1.0, 1.0));
}

#[test]
fn evaluation_is_independent_of_thread_count() {
    let catalog = Catalog::shipped();
    let data = generate(&catalog, &SyntheticConfig { queries: 80, ..Default::default() });
    let scorer = RandomScorer::new(3);
    let many = evaluate(&scorer, &data.corpus, &catalog).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| evaluate(&scorer, &data.corpus, &catalog).unwrap());
    assert_eq!(many, one);
}
