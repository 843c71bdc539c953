//! Minibatch training with BCE loss, Adam and early stopping.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{
    bce_loss, encode_query, encode_question, head_backward, head_forward, query_backward, query_forward,
    question_backward, question_forward, QuestionFeatures, QuestionInput,
};
use super::optim::AdamState;
use super::{init_weights, HyperParams, ModelError, ModelWeights};
use crate::catalog::{split_corpus, Catalog, Corpus};
use crate::embeddings::{EmbeddingTable, SequenceMatrix};
use crate::{Real, NUM_QUESTIONS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Epoch (1-based) whose weights were returned.
    pub best_epoch: usize,
    /// Last epoch run.
    pub stopping_epoch: usize,
    pub stopped_early: bool,
    pub train_queries: usize,
    pub validation_queries: usize,
    pub seed: u64,
    /// Parallel minibatches sum gradients in a different order than the
    /// single-threaded path, so results are not bitwise comparable across
    /// the two modes.
    pub parallel: bool,
    pub wall_time_secs: f64,
}

impl TrainReport {
    /// Equality of everything except wall time.
    pub fn same_run(&self, other: &Self) -> bool {
        self.epochs == other.epochs
            && self.best_epoch == other.best_epoch
            && self.stopping_epoch == other.stopping_epoch
            && self.stopped_early == other.stopped_early
            && self.train_queries == other.train_queries
            && self.validation_queries == other.validation_queries
            && self.seed == other.seed
            && self.parallel == other.parallel
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TrainOptions {
    /// Split each minibatch across the rayon pool.
    pub parallel: bool,
}

/// Embedded training data: one matrix per query and one input per catalog
/// question (index `id - 1`).
pub(crate) struct Encoded<T> {
    pub queries: Vec<SequenceMatrix<T>>,
    pub labels: Vec<[bool; NUM_QUESTIONS]>,
}

pub(crate) fn encode_corpus<T: Real>(w: &ModelWeights<T>, table: &EmbeddingTable, corpus: &Corpus) -> Encoded<T> {
    Encoded {
        queries: corpus.queries.iter().map(|q| encode_query(w, table, &q.tokens)).collect(),
        labels: corpus
            .queries
            .iter()
            .map(|q| std::array::from_fn(|i| q.valid_cq_ids.contains(&(i as u8 + 1))))
            .collect(),
    }
}

pub(crate) fn encode_catalog<T: Real>(w: &ModelWeights<T>, table: &EmbeddingTable, catalog: &Catalog) -> Vec<QuestionInput<T>> {
    catalog.iter().map(|cq| encode_question(w, table, cq)).collect()
}

/// Probabilities for every (query, question) pair.
pub(crate) fn score_all<T: Real>(
    w: &ModelWeights<T>,
    queries: &[SequenceMatrix<T>],
    questions: &[QuestionInput<T>],
) -> Result<Vec<[T; NUM_QUESTIONS]>, ModelError> {
    let feats = questions.iter().map(|q| question_forward(w, q)).collect::<Result<Vec<_>, _>>()?;
    Ok(queries
        .iter()
        .map(|q| {
            let (qf, _) = query_forward(w, q);
            std::array::from_fn(|c| head_forward(w, &qf, &feats[c].features).probability)
        })
        .collect())
}

fn mean_loss<T: Real>(w: &ModelWeights<T>, data: &Encoded<T>, questions: &[QuestionInput<T>]) -> Result<f64, ModelError> {
    let scores = score_all(w, &data.queries, questions)?;
    let mut total = 0.0;
    for (s, labels) in scores.iter().zip(&data.labels) {
        for c in 0..NUM_QUESTIONS {
            let y = if labels[c] { T::one() } else { T::zero() };
            total += bce_loss(s[c], y).to_f64().unwrap();
        }
    }
    Ok(total / (scores.len() * NUM_QUESTIONS) as f64)
}

#[derive(Debug, Clone, Copy)]
struct Example {
    query: u32,
    question: u8,
    label: bool,
}

/// Accumulates the mean-loss gradient of `batch` into `grads` and returns the
/// summed loss. Question branches run once per distinct question in the
/// batch; their incoming gradients are summed before the backward pass.
fn batch_step<T: Real>(
    w: &ModelWeights<T>,
    queries: &[SequenceMatrix<T>],
    questions: &[QuestionInput<T>],
    batch: &[Example],
    grads: &mut ModelWeights<T>,
    parallel: bool,
) -> Result<T, ModelError> {
    let scale = T::one() / T::from_usize(batch.len()).unwrap();
    let mut used = [false; NUM_QUESTIONS];
    for e in batch {
        used[e.question as usize] = true;
    }
    let ids: Vec<usize> = (0..NUM_QUESTIONS).filter(|&c| used[c]).collect();
    let forward_one = |&c: &usize| question_forward(w, &questions[c]).map(|f| (c, f));
    let feats: Vec<(usize, QuestionFeatures<T>)> = if parallel {
        ids.par_iter().map(forward_one).collect::<Result<_, _>>()?
    } else {
        ids.iter().map(forward_one).collect::<Result<_, _>>()?
    };
    let mut slot = [usize::MAX; NUM_QUESTIONS];
    for (k, (c, _)) in feats.iter().enumerate() {
        slot[*c] = k;
    }
    let q_width = w.hyper.cnn_fc_out;
    let q_feat_width = w.hyper.head_input() - q_width;

    // per-question upstream gradients, indexed like `feats`
    let run = |chunk: &[Example], grads: &mut ModelWeights<T>| -> (T, Vec<Vec<T>>) {
        let mut loss = T::zero();
        let mut dq = vec![vec![T::zero(); q_feat_width]; feats.len()];
        for e in chunk {
            let query = &queries[e.query as usize];
            let (qf, qcache) = query_forward(w, query);
            let k = slot[e.question as usize];
            let head = head_forward(w, &qf, &feats[k].1.features);
            let y = if e.label { T::one() } else { T::zero() };
            loss += bce_loss(head.probability, y);
            let dconcat = head_backward(w, &head, y, scale, grads);
            query_backward(w, query, &qcache, &dconcat[..q_width], grads);
            for (a, &b) in dq[k].iter_mut().zip(&dconcat[q_width..]) {
                *a += b;
            }
        }
        (loss, dq)
    };

    let (loss, dq) = if parallel {
        let chunk = batch.len().div_ceil(rayon::current_num_threads()).max(1);
        let parts: Vec<(T, Vec<Vec<T>>, ModelWeights<T>)> = batch
            .par_chunks(chunk)
            .map(|c| {
                let mut g = w.zeros_like();
                let (l, d) = run(c, &mut g);
                (l, d, g)
            })
            .collect();
        let mut loss = T::zero();
        let mut dq = vec![vec![T::zero(); q_feat_width]; feats.len()];
        for (l, d, g) in parts {
            loss += l;
            for (acc, part) in dq.iter_mut().zip(d) {
                acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
            }
            add_into(grads, &g);
        }
        (loss, dq)
    } else {
        run(batch, grads)
    };

    if parallel {
        let parts: Vec<ModelWeights<T>> = feats
            .par_iter()
            .zip(dq.par_iter())
            .map(|((c, f), d)| {
                let mut g = w.zeros_like();
                question_backward(w, &questions[*c], f, d, &mut g);
                g
            })
            .collect();
        for g in &parts {
            add_into(grads, g);
        }
    } else {
        for ((c, f), d) in feats.iter().zip(&dq) {
            question_backward(w, &questions[*c], f, d, grads);
        }
    }
    Ok(loss)
}

fn add_into<T: Real>(acc: &mut ModelWeights<T>, g: &ModelWeights<T>) {
    for ((_, a), (_, b)) in acc.blocks_mut().into_iter().zip(g.blocks()) {
        a.iter_mut().zip(b.iter()).for_each(|(x, &y)| *x += y);
    }
}

fn zero_out<T: Real>(w: &mut ModelWeights<T>) {
    for (_, b) in w.blocks_mut() {
        b.iter_mut().for_each(|x| *x = T::zero());
    }
}

/// Number of training queries held out for early stopping.
pub fn validation_size(n: usize, fraction: f64) -> usize {
    if n < 2 || fraction <= 0.0 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}

pub fn train(
    corpus: &Corpus,
    catalog: &Catalog,
    table: &EmbeddingTable,
    hyper: &HyperParams,
) -> Result<(ModelWeights<f32>, TrainReport), ModelError> {
    train_with_options(corpus, catalog, table, hyper, TrainOptions::default())
}

pub fn train_with_options(
    corpus: &Corpus,
    catalog: &Catalog,
    table: &EmbeddingTable,
    hyper: &HyperParams,
    options: TrainOptions,
) -> Result<(ModelWeights<f32>, TrainReport), ModelError> {
    train_generic(corpus, catalog, table, hyper, options)
}

pub fn train_generic<T: Real>(
    corpus: &Corpus,
    catalog: &Catalog,
    table: &EmbeddingTable,
    hyper: &HyperParams,
    options: TrainOptions,
) -> Result<(ModelWeights<T>, TrainReport), ModelError> {
    let started = Instant::now();
    hyper.validate()?;
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    if let Some(dim) = hyper.embedding_dim {
        if dim != table.dimension() {
            return Err(ModelError::DimensionMismatch { model: dim, table: table.dimension() });
        }
    }

    let n_val = validation_size(corpus.len(), hyper.validation_fraction);
    let (fit, val) = if n_val == 0 {
        (corpus.clone(), Corpus::empty())
    } else {
        let frac = (corpus.len() - n_val) as f64 / corpus.len() as f64;
        split_corpus(corpus, frac, hyper.seed ^ 0x76_616c)?
    };

    let mut weights: ModelWeights<T> = init_weights(hyper, table.dimension(), table.fingerprint());
    let questions = encode_catalog(&weights, table, catalog);
    let fit_data = encode_corpus(&weights, table, &fit);
    let val_data = encode_corpus(&weights, table, &val);

    let mut examples: Vec<Example> = (0..fit.len())
        .flat_map(|q| {
            let labels = fit_data.labels[q];
            (0..NUM_QUESTIONS).map(move |c| Example { query: q as u32, question: c as u8, label: labels[c] })
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x7368_7566);
    let mut adam = AdamState::new(&weights);
    let mut grads = weights.zeros_like();
    let mut best = (f64::INFINITY, weights.clone(), 0usize);
    let mut epochs = Vec::new();
    let mut bad_epochs = 0;
    let mut stopped_early = false;

    for epoch in 1..=hyper.max_epochs {
        examples.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in examples.chunks(hyper.batch_size) {
            zero_out(&mut grads);
            let loss = batch_step(&weights, &fit_data.queries, &questions, batch, &mut grads, options.parallel)?;
            total += loss.to_f64().unwrap();
            adam.step(&mut weights, &grads)?;
        }
        let train_loss = total / examples.len() as f64;
        let validation_loss = if val.is_empty() {
            train_loss
        } else {
            mean_loss(&weights, &val_data, &questions)?
        };
        tracing::info!(epoch, train_loss, validation_loss, "epoch finished");
        epochs.push(EpochStats { epoch, train_loss, validation_loss });
        if validation_loss < best.0 {
            best = (validation_loss, weights.clone(), epoch);
            bad_epochs = 0;
        } else {
            bad_epochs += 1;
            if bad_epochs >= hyper.early_stop_patience {
                stopped_early = epoch < hyper.max_epochs;
                break;
            }
        }
    }

    let stopping_epoch = epochs.len();
    let report = TrainReport {
        epochs,
        best_epoch: best.2,
        stopping_epoch,
        stopped_early,
        train_queries: fit.len(),
        validation_queries: val.len(),
        seed: hyper.seed,
        parallel: options.parallel,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok((best.1, report))
}
