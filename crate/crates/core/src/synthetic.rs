//! Seeded synthetic corpora with known structure, for smoke runs and
//! end-to-end checks without the real data.
//!
//! Every catalog question owns a few marker tokens; a query is valid for
//! exactly the questions whose markers it contains, surrounded by filler
//! terms. Marker vectors lean slightly toward their question's averaged
//! text embedding, so plain embedding similarity carries some signal while
//! the trained model can learn the exact mapping. Fillers are short
//! low-norm vectors, playing the part of stopwords.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{AnnotatedQuery, Catalog, Corpus};
use crate::embeddings::{average_embedding, EmbeddingTable};
use crate::model::HyperParams;
use crate::NUM_QUESTIONS;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub queries: usize,
    pub dimension: usize,
    pub markers_per_question: usize,
    pub filler_vocabulary: usize,
    /// Valid questions per query, drawn uniformly from this range.
    pub min_valid: usize,
    pub max_valid: usize,
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Weight of the question direction in a marker vector (noise has unit
    /// scale per component).
    pub marker_alignment: f64,
    /// Scale of filler vectors relative to markers.
    pub filler_scale: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            queries: 200,
            dimension: 50,
            markers_per_question: 1,
            filler_vocabulary: 10,
            min_valid: 1,
            max_valid: 1,
            min_fillers: 0,
            max_fillers: 2,
            marker_alignment: 0.3,
            filler_scale: 0.25,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub corpus: Corpus,
    pub table: EmbeddingTable,
    /// `markers[id - 1]` are the tokens that make question `id` valid.
    pub markers: Vec<Vec<String>>,
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 { v.to_vec() } else { v.iter().map(|x| x / n).collect() }
}

pub fn generate(catalog: &Catalog, config: &SyntheticConfig) -> SyntheticData {
    assert!(config.min_valid >= 1 && config.min_valid <= config.max_valid && config.max_valid <= NUM_QUESTIONS);
    assert!(config.min_fillers <= config.max_fillers && config.filler_vocabulary > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dim = config.dimension;

    let mut catalog_vocab: BTreeSet<String> = BTreeSet::new();
    for cq in catalog {
        catalog_vocab.extend(cq.question_tokens());
        catalog_vocab.extend(cq.answer_tokens());
    }
    let mut entries: Vec<(String, Vec<f64>)> = catalog_vocab.iter().map(|t| (t.clone(), random_vector(&mut rng, dim))).collect();
    let base = EmbeddingTable::from_entries(entries.iter().map(|(t, v)| (t.clone(), v.iter().map(|&x| x as f32).collect())))
        .expect("catalog vocabulary is non-empty");

    // Question directions with the shared component removed, so that
    // markers separate questions instead of all pointing at common words.
    let question_vecs: Vec<Vec<f64>> = catalog
        .iter()
        .map(|cq| {
            let q = average_embedding(&base, &cq.question_tokens());
            let a = average_embedding(&base, &cq.answer_tokens());
            q.iter().zip(&a).map(|(x, y)| x + y).collect()
        })
        .collect();
    let mean: Vec<f64> = (0..dim).map(|d| question_vecs.iter().map(|v| v[d]).sum::<f64>() / NUM_QUESTIONS as f64).collect();
    let scale = (dim as f64 / 3.0).sqrt();

    let mut markers = Vec::with_capacity(NUM_QUESTIONS);
    for (j, v) in question_vecs.iter().enumerate() {
        let dir = unit(&v.iter().zip(&mean).map(|(x, m)| x - m).collect::<Vec<_>>());
        let mut names = Vec::new();
        for k in 0..config.markers_per_question {
            let name = format!("mk{}x{}", j + 1, k + 1);
            let noise = random_vector(&mut rng, dim);
            let vec = dir.iter().zip(&noise).map(|(d, n)| config.marker_alignment * scale * d + n).collect();
            entries.push((name.clone(), vec));
            names.push(name);
        }
        markers.push(names);
    }
    let fillers: Vec<String> = (0..config.filler_vocabulary).map(|i| format!("fw{i}")).collect();
    for f in &fillers {
        let v = random_vector(&mut rng, dim).into_iter().map(|x| x * config.filler_scale).collect();
        entries.push((f.clone(), v));
    }

    let ids: Vec<u8> = (1..=NUM_QUESTIONS as u8).collect();
    let mut seen = BTreeSet::new();
    let mut queries = Vec::with_capacity(config.queries);
    while queries.len() < config.queries {
        let k = rng.random_range(config.min_valid..=config.max_valid);
        let valid: BTreeSet<u8> = ids.choose_multiple(&mut rng, k).copied().collect();
        let mut tokens: Vec<String> = valid.iter().map(|&id| markers[id as usize - 1].choose(&mut rng).unwrap().clone()).collect();
        let n_fill = rng.random_range(config.min_fillers..=config.max_fillers);
        tokens.extend((0..n_fill).map(|_| fillers.choose(&mut rng).unwrap().clone()));
        tokens.shuffle(&mut rng);
        if !seen.insert(tokens.clone()) {
            continue;
        }
        let mut q = AnnotatedQuery::seed(format!("syn{}", queries.len() + 1), "", valid);
        q.tokens = tokens;
        queries.push(q);
    }

    let table = EmbeddingTable::from_entries(entries.into_iter().map(|(t, v)| (t, v.into_iter().map(|x| x as f32).collect())))
        .expect("distinct synthetic tokens");
    SyntheticData { corpus: Corpus::new(queries).expect("unique synthetic queries"), table, markers }
}

/// Training settings that learn the default synthetic corpus in about a
/// minute: width-1 filters see a marker on its own, and the small BiLSTM
/// keeps epochs cheap.
pub fn synthetic_hyper() -> HyperParams {
    HyperParams {
        cnn_filter_widths: vec![1, 2, 3],
        lstm_hidden: 16,
        learning_rate: 2e-3,
        max_epochs: 60,
        early_stop_patience: 60,
        ..Default::default()
    }
}
