use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::hyper::{Architecture, HyperParams};
use super::layers::{BiLstmBranch, CnnBranch, Dense};
use crate::Real;

/// Every learned parameter of the ranker, plus the configuration that fixes
/// their shapes and the fingerprint of the embeddings they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights<T> {
    pub hyper: HyperParams,
    pub embedding_dim: usize,
    pub fingerprint: String,
    pub query_cnn: CnnBranch<T>,
    /// Absent for [`Architecture::QueryOnly`].
    pub cq_lstm: Option<BiLstmBranch<T>>,
    /// Absent for [`Architecture::QueryOnly`].
    pub answers_cnn: Option<CnnBranch<T>>,
    pub head_hidden: Dense<T>,
    pub head_out: Dense<T>,
}

impl<T: Real> ModelWeights<T> {
    /// All-zero parameters with the shapes implied by `hyper`.
    pub fn zeros(hyper: &HyperParams, embedding_dim: usize, fingerprint: &str) -> Self {
        let hp = hyper;
        let cnn = || CnnBranch::zeros(embedding_dim, hp.cnn_filters_per_width, &hp.cnn_filter_widths, hp.cnn_fc_out);
        let full = hp.architecture == Architecture::Full;
        Self {
            hyper: hp.clone(),
            embedding_dim,
            fingerprint: fingerprint.to_string(),
            query_cnn: cnn(),
            cq_lstm: full.then(|| BiLstmBranch::zeros(embedding_dim, hp.lstm_hidden)),
            answers_cnn: full.then(cnn),
            head_hidden: Dense::zeros(hp.head_input(), hp.head_hidden),
            head_out: Dense::zeros(hp.head_hidden, 1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.hyper, self.embedding_dim, &self.fingerprint)
    }

    /// Named parameter blocks in the fixed serialization order.
    pub fn blocks(&self) -> Vec<(String, &Vec<T>)> {
        let mut out = Vec::new();
        prefixed(&mut out, "query_cnn", self.query_cnn.params());
        if let Some(l) = &self.cq_lstm {
            prefixed(&mut out, "cq_lstm", l.params());
        }
        if let Some(c) = &self.answers_cnn {
            prefixed(&mut out, "answers_cnn", c.params());
        }
        prefixed(&mut out, "head", vec![
            ("hidden.weight".into(), &self.head_hidden.weight),
            ("hidden.bias".into(), &self.head_hidden.bias),
            ("out.weight".into(), &self.head_out.weight),
            ("out.bias".into(), &self.head_out.bias),
        ]);
        out
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut Vec<T>)> {
        let mut out = Vec::new();
        prefixed(&mut out, "query_cnn", self.query_cnn.params_mut());
        if let Some(l) = &mut self.cq_lstm {
            prefixed(&mut out, "cq_lstm", l.params_mut());
        }
        if let Some(c) = &mut self.answers_cnn {
            prefixed(&mut out, "answers_cnn", c.params_mut());
        }
        prefixed(&mut out, "head", vec![
            ("hidden.weight".into(), &mut self.head_hidden.weight),
            ("hidden.bias".into(), &mut self.head_hidden.bias),
            ("out.weight".into(), &mut self.head_out.weight),
            ("out.bias".into(), &mut self.head_out.bias),
        ]);
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.blocks().iter().map(|(_, b)| b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|(_, b)| b.iter().all(|x| x.is_finite()))
    }

    /// The same parameters in another float type.
    pub fn cast<U: Real>(&self) -> ModelWeights<U> {
        let mut out = ModelWeights::<U>::zeros(&self.hyper, self.embedding_dim, &self.fingerprint);
        for ((_, dst), (_, src)) in out.blocks_mut().into_iter().zip(self.blocks()) {
            for (d, &s) in dst.iter_mut().zip(src.iter()) {
                *d = U::from(s).unwrap();
            }
        }
        out
    }
}

/// Fan-in of each block in [`ModelWeights::blocks`] order; biases share their
/// layer's fan-in.
fn fan_ins(hp: &HyperParams, dim: usize) -> Vec<usize> {
    let mut cnn = Vec::new();
    for &w in &hp.cnn_filter_widths {
        cnn.push(w * dim);
        cnn.push(w * dim);
    }
    cnn.push(hp.cnn_features());
    cnn.push(hp.cnn_features());
    let mut out = cnn.clone();
    if hp.architecture == Architecture::Full {
        out.extend(std::iter::repeat_n(dim + hp.lstm_hidden, 6));
        out.extend(cnn);
    }
    out.extend([hp.head_input(), hp.head_input(), hp.head_hidden, hp.head_hidden]);
    out
}

/// Uniform `[-sqrt(1/fan_in), sqrt(1/fan_in)]` initialization from a
/// generator seeded with `hyper.seed`.
pub fn init_weights<T: Real>(hyper: &HyperParams, embedding_dim: usize, fingerprint: &str) -> ModelWeights<T> {
    let mut w = ModelWeights::zeros(hyper, embedding_dim, fingerprint);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let fans = fan_ins(hyper, embedding_dim);
    for ((_, block), fan) in w.blocks_mut().into_iter().zip(fans) {
        let bound = (1.0 / fan as f64).sqrt();
        for x in block.iter_mut() {
            *x = T::from(rng.random_range(-bound..=bound)).unwrap();
        }
    }
    w
}

fn prefixed<V>(out: &mut Vec<(String, V)>, prefix: &str, items: Vec<(String, V)>) {
    out.extend(items.into_iter().map(|(n, v)| (format!("{prefix}.{n}"), v)));
}
