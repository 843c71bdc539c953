//! GloVe text-format word embeddings.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::Real;

/// Dimensionality of the Stack Overflow GloVe vectors the ranker was designed
/// around.
pub const DEFAULT_DIMENSION: usize = 200;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding file is empty")]
    Empty,
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: duplicate token {token:?}")]
    DuplicateToken { line: usize, token: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("vector length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Immutable token → vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    fingerprint: String,
}

impl EmbeddingTable {
    /// Parses GloVe text. The fingerprint is the SHA-256 of `bytes`.
    pub fn from_bytes(bytes: &[u8], expected_dimension: Option<usize>) -> Result<Self, EmbeddingError> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| EmbeddingError::Malformed { line: 0, message: e.to_string() })?;
        let mut dimension = expected_dimension;
        let mut index = HashMap::new();
        let mut data = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().expect("non-blank line has a token");
            let start = data.len();
            for p in parts {
                let v: f32 = p.parse().map_err(|_| EmbeddingError::Malformed {
                    line: line_no,
                    message: format!("not a number: {p:?}"),
                })?;
                data.push(v);
            }
            let found = data.len() - start;
            let expected = *dimension.get_or_insert(found);
            if found != expected || found == 0 {
                return Err(EmbeddingError::DimensionMismatch { line: line_no, expected, found });
            }
            if index.insert(token.to_string(), index.len()).is_some() {
                return Err(EmbeddingError::DuplicateToken { line: line_no, token: token.to_string() });
            }
        }
        let dimension = match dimension {
            Some(d) if !index.is_empty() => d,
            _ => return Err(EmbeddingError::Empty),
        };
        Ok(Self { dimension, index, data, fingerprint: hex_sha256(bytes) })
    }

    /// Builds a table in memory. The fingerprint is taken over the equivalent
    /// GloVe text, so writing it out with [`Self::to_glove_text`] and loading
    /// it back reproduces the same fingerprint.
    pub fn from_entries<S: Into<String>>(
        entries: impl IntoIterator<Item = (S, Vec<f32>)>,
    ) -> Result<Self, EmbeddingError> {
        let mut text = String::new();
        for (token, v) in entries {
            text.push_str(&token.into());
            for x in v {
                write!(text, " {x:?}").unwrap();
            }
            text.push('\n');
        }
        Self::from_bytes(text.as_bytes(), None)
    }

    pub fn to_glove_text(&self) -> String {
        let mut rows: Vec<(&String, &usize)> = self.index.iter().collect();
        rows.sort_by_key(|(_, &i)| i);
        let mut text = String::new();
        for (token, &i) in rows {
            text.push_str(token);
            for x in self.vector_at(i) {
                write!(text, " {x:?}").unwrap();
            }
            text.push('\n');
        }
        text
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Hex SHA-256 of the source bytes.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index.get(token).map(|&i| self.vector_at(i))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    fn vector_at(&self, i: usize) -> &[f32] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        write!(s, "{b:02x}").unwrap();
    }
    s
}

pub fn load_embeddings(path: impl AsRef<Path>, expected_dimension: Option<usize>) -> Result<EmbeddingTable, EmbeddingError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| EmbeddingError::Io { path: path.into(), source })?;
    EmbeddingTable::from_bytes(&bytes, expected_dimension)
}

/// Fixed-shape, zero-padded sequence of embedding rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMatrix<T> {
    data: Vec<T>,
    max_len: usize,
    dim: usize,
    true_length: usize,
}

impl<T: Real> SequenceMatrix<T> {
    pub fn zeros(max_len: usize, dim: usize) -> Self {
        Self { data: vec![T::zero(); max_len * dim], max_len, dim, true_length: 0 }
    }

    /// Builds a matrix from explicit rows; `rows.len()` becomes the true
    /// length and must not exceed `max_len`.
    pub fn from_rows(rows: &[Vec<T>], max_len: usize, dim: usize) -> Self {
        assert!(rows.len() <= max_len, "more rows than max_len");
        let mut m = Self::zeros(max_len, dim);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim, "row width");
            m.data[i * dim..(i + 1) * dim].copy_from_slice(r);
        }
        m.true_length = rows.len();
        m
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// `count` consecutive rows starting at `start`, flattened.
    pub fn rows(&self, start: usize, count: usize) -> &[T] {
        &self.data[start * self.dim..(start + count) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn true_length(&self) -> usize {
        self.true_length
    }

    /// The same content with a different amount of trailing padding.
    pub fn repadded(&self, max_len: usize) -> Self {
        assert!(max_len >= self.true_length);
        let mut m = Self::zeros(max_len, self.dim);
        let n = self.true_length * self.dim;
        m.data[..n].copy_from_slice(&self.data[..n]);
        m.true_length = self.true_length;
        m
    }
}

/// Embeds the first `max_len` tokens; out-of-vocabulary tokens and padding are
/// zero rows.
pub fn embed_sequence<T: Real>(table: &EmbeddingTable, tokens: &[String], max_len: usize) -> SequenceMatrix<T> {
    assert!(max_len >= 1, "max_len must be positive");
    let mut m = SequenceMatrix::zeros(max_len, table.dimension());
    let n = tokens.len().min(max_len);
    for (i, tok) in tokens.iter().take(n).enumerate() {
        if let Some(v) = table.get(tok) {
            for (dst, &x) in m.row_mut(i).iter_mut().zip(v) {
                *dst = T::from(x).unwrap();
            }
        }
    }
    m.true_length = n;
    m
}

/// Mean of the token vectors; OOV tokens count as zero vectors in the
/// denominator, and an empty list averages to the zero vector.
pub fn average_embedding(table: &EmbeddingTable, tokens: &[String]) -> Vec<f64> {
    let mut acc = vec![0.0f64; table.dimension()];
    if tokens.is_empty() {
        return acc;
    }
    for tok in tokens {
        if let Some(v) = table.get(tok) {
            for (a, &x) in acc.iter_mut().zip(v) {
                *a += x as f64;
            }
        }
    }
    let n = tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Cosine similarity, defined as 0 when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::LengthMismatch(a.len(), b.len()));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
