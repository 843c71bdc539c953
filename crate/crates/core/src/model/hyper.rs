use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::NUM_QUESTIONS;

/// Which inputs feed the dense head.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Query CNN + question BiLSTM + answers CNN.
    #[default]
    Full,
    /// Query CNN + one-hot question id; question and answer text are ignored.
    QueryOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub architecture: Architecture,
    /// Expected embedding width; `None` accepts whatever the table provides.
    pub embedding_dim: Option<usize>,
    pub max_len_query: usize,
    pub max_len_cq: usize,
    pub max_len_ans: usize,
    pub cnn_filter_widths: Vec<usize>,
    pub cnn_filters_per_width: usize,
    pub cnn_fc_out: usize,
    pub lstm_hidden: usize,
    pub head_hidden: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Fraction of training queries held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
    pub probability_clamp_eps: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            architecture: Architecture::Full,
            embedding_dim: None,
            max_len_query: 12,
            max_len_cq: 16,
            max_len_ans: 16,
            cnn_filter_widths: vec![2, 3],
            cnn_filters_per_width: 64,
            cnn_fc_out: 64,
            lstm_hidden: 64,
            head_hidden: 64,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            max_epochs: 20,
            early_stop_patience: 3,
            validation_fraction: 0.1,
            seed: 42,
            probability_clamp_eps: 1e-7,
        }
    }
}

impl HyperParams {
    pub fn query_only(self) -> Self {
        Self { architecture: Architecture::QueryOnly, ..self }
    }

    /// Width of the concatenated branch outputs entering the head.
    pub fn head_input(&self) -> usize {
        match self.architecture {
            Architecture::Full => 2 * self.cnn_fc_out + 2 * self.lstm_hidden,
            Architecture::QueryOnly => self.cnn_fc_out + NUM_QUESTIONS,
        }
    }

    /// Pooled features per CNN branch before its fully connected layer.
    pub fn cnn_features(&self) -> usize {
        self.cnn_filters_per_width * self.cnn_filter_widths.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidHyperParams(msg));
        let sizes = [
            ("max_len_query", self.max_len_query),
            ("max_len_cq", self.max_len_cq),
            ("max_len_ans", self.max_len_ans),
            ("cnn_filters_per_width", self.cnn_filters_per_width),
            ("cnn_fc_out", self.cnn_fc_out),
            ("lstm_hidden", self.lstm_hidden),
            ("head_hidden", self.head_hidden),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return bad(format!("{name} must be positive"));
        }
        if self.cnn_filter_widths.is_empty() {
            return bad("cnn_filter_widths is empty".into());
        }
        for &w in &self.cnn_filter_widths {
            if w == 0 || w > self.max_len_query || w > self.max_len_ans {
                return bad(format!("filter width {w} must be in 1..=min(max_len_query, max_len_ans)"));
            }
        }
        let positive = [
            ("learning_rate", self.learning_rate),
            ("adam_eps", self.adam_eps),
            ("probability_clamp_eps", self.probability_clamp_eps),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return bad(format!("{name} must be positive and finite"));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must be in [0, 1)"));
            }
        }
        if self.probability_clamp_eps >= 0.5 {
            return bad("probability_clamp_eps must be below 0.5".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad("validation_fraction must be in [0, 1)".into());
        }
        Ok(())
    }
}
