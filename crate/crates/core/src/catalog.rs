//! Clarification-question catalog, annotated query corpora, triplet
//! construction and train/test splitting.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tokenize::{is_valid_token, tokenize};
use crate::NUM_QUESTIONS;

/// Version tag of the shipped catalog, reported by the service and stamped on
/// loaded corpora.
pub const CATALOG_VERSION: &str = "cq16-v1";

const SHIPPED_CATALOG: &str = include_str!("../data/catalog.json");

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("catalog parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate clarification question id {0}")]
    DuplicateId(u8),
    #[error("missing clarification question id {0}")]
    MissingId(u8),
    #[error("clarification question id {0} outside 1..=16")]
    IdOutOfRange(i64),
    #[error("clarification question {0} has empty text")]
    EmptyText(u8),
    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: query tokens duplicate those of query {other}")]
    DuplicateTokens { line: usize, other: String },
    #[error("line {line}: duplicate query id {id}")]
    DuplicateQueryId { line: usize, id: String },
    #[error("train fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("corpus is empty")]
    EmptyCorpus,
}

pub type Result<T, E = CatalogError> = std::result::Result<T, E>;

/// One catalog entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClarificationQuestion {
    pub id: u8,
    pub text: String,
    #[serde(rename = "answers")]
    pub common_answers: Vec<String>,
}

impl ClarificationQuestion {
    pub fn question_tokens(&self) -> Vec<String> {
        tokenize(&self.text)
    }

    /// All common answers tokenized and concatenated in catalog order.
    pub fn answer_tokens(&self) -> Vec<String> {
        self.common_answers.iter().flat_map(|a| tokenize(a)).collect()
    }
}

/// The validated 16-question catalog, ordered by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    questions: Vec<ClarificationQuestion>,
}

#[derive(Deserialize)]
struct RawQuestion {
    id: i64,
    text: String,
    #[serde(default)]
    answers: Vec<String>,
}

impl Catalog {
    /// The catalog compiled into the crate.
    pub fn shipped() -> Self {
        Self::from_json_str(SHIPPED_CATALOG).expect("shipped catalog is valid")
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let raw: Vec<RawQuestion> = serde_json::from_str(json)?;
        let mut slots: Vec<Option<ClarificationQuestion>> = vec![None; NUM_QUESTIONS];
        for q in raw {
            if !(1..=NUM_QUESTIONS as i64).contains(&q.id) {
                return Err(CatalogError::IdOutOfRange(q.id));
            }
            let id = q.id as u8;
            if q.text.trim().is_empty() {
                return Err(CatalogError::EmptyText(id));
            }
            let slot = &mut slots[id as usize - 1];
            if slot.is_some() {
                return Err(CatalogError::DuplicateId(id));
            }
            *slot = Some(ClarificationQuestion { id, text: q.text, common_answers: q.answers });
        }
        let questions = slots
            .into_iter()
            .enumerate()
            .map(|(i, q)| q.ok_or(CatalogError::MissingId(i as u8 + 1)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { questions })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.questions).expect("catalog serializes")
    }

    /// Entry for `id` in 1..=16.
    pub fn get(&self, id: u8) -> Option<&ClarificationQuestion> {
        id.checked_sub(1).and_then(|i| self.questions.get(i as usize))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ClarificationQuestion> {
        self.questions.iter()
    }

    pub fn len(&self) -> usize {
        self.questions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn questions(&self) -> &[ClarificationQuestion] {
        &self.questions
    }
}

impl<'a> IntoIterator for &'a Catalog {
    type Item = &'a ClarificationQuestion;
    type IntoIter = std::slice::Iter<'a, ClarificationQuestion>;
    fn into_iter(self) -> Self::IntoIter {
        self.iter()
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CatalogError::Io { path: path.into(), source })?;
    Catalog::from_json_str(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Seed,
    Augmented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedQuery {
    pub id: String,
    pub tokens: Vec<String>,
    pub valid_cq_ids: BTreeSet<u8>,
    pub origin: Origin,
    pub seed_id: String,
}

impl AnnotatedQuery {
    /// A seed query built from raw text.
    pub fn seed(id: impl Into<String>, text: &str, valid: impl IntoIterator<Item = u8>) -> Self {
        let id = id.into();
        Self {
            seed_id: id.clone(),
            id,
            tokens: tokenize(text),
            valid_cq_ids: valid.into_iter().collect(),
            origin: Origin::Seed,
        }
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty query id".into());
        }
        if self.tokens.is_empty() {
            return Err(format!("query {} has no tokens", self.id));
        }
        if let Some(t) = self.tokens.iter().find(|t| !is_valid_token(t)) {
            return Err(format!("query {} has invalid token {t:?}", self.id));
        }
        if let Some(id) = self.valid_cq_ids.iter().find(|&&id| id == 0 || id as usize > NUM_QUESTIONS) {
            return Err(format!("query {}: clarification question id {id} outside 1..=16", self.id));
        }
        if self.origin == Origin::Seed && self.seed_id != self.id {
            return Err(format!("seed query {} has seed_id {}", self.id, self.seed_id));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub queries: Vec<AnnotatedQuery>,
    pub catalog_version: String,
}

impl Corpus {
    /// Builds a corpus, enforcing unique ids and pairwise distinct token
    /// sequences. Empty `valid_cq_ids` are allowed here (test fixtures);
    /// [`load_corpus`] is stricter for seed queries.
    pub fn new(queries: Vec<AnnotatedQuery>) -> Result<Self> {
        Self::validate(&queries, false)?;
        Ok(Self { queries, catalog_version: CATALOG_VERSION.to_string() })
    }

    pub fn empty() -> Self {
        Self { queries: Vec::new(), catalog_version: CATALOG_VERSION.to_string() }
    }

    fn validate(queries: &[AnnotatedQuery], strict: bool) -> Result<()> {
        let mut ids: HashSet<&str> = HashSet::with_capacity(queries.len());
        let mut seen: HashMap<&[String], &str> = HashMap::with_capacity(queries.len());
        for (i, q) in queries.iter().enumerate() {
            let line = i + 1;
            q.check().map_err(|message| CatalogError::MalformedLine { line, message })?;
            if strict && q.origin == Origin::Seed && q.valid_cq_ids.is_empty() {
                return Err(CatalogError::MalformedLine {
                    line,
                    message: format!("seed query {} has no valid clarification questions", q.id),
                });
            }
            if !ids.insert(&q.id) {
                return Err(CatalogError::DuplicateQueryId { line, id: q.id.clone() });
            }
            if let Some(other) = seen.insert(&q.tokens, &q.id) {
                return Err(CatalogError::DuplicateTokens { line, other: other.to_string() });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Total number of (query, valid question) pairs.
    pub fn label_count(&self) -> usize {
        self.queries.iter().map(|q| q.valid_cq_ids.len()).sum()
    }
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CatalogError::Io { path: path.into(), source })?;
    read_corpus(BufReader::new(file))
}

/// Parses corpus JSONL from any reader. Blank lines are skipped.
pub fn read_corpus(reader: impl BufRead) -> Result<Corpus> {
    let mut queries = Vec::new();
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CatalogError::MalformedLine { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let q: AnnotatedQuery = serde_json::from_str(&line)
            .map_err(|e| CatalogError::MalformedLine { line: line_no, message: e.to_string() })?;
        queries.push(q);
        lines.push(line_no);
    }
    // re-map positional errors back to file line numbers
    Corpus::validate(&queries, true).map_err(|e| match e {
        CatalogError::MalformedLine { line, message } => CatalogError::MalformedLine { line: lines[line - 1], message },
        CatalogError::DuplicateTokens { line, other } => CatalogError::DuplicateTokens { line: lines[line - 1], other },
        CatalogError::DuplicateQueryId { line, id } => CatalogError::DuplicateQueryId { line: lines[line - 1], id },
        other => other,
    })?;
    Ok(Corpus { queries, catalog_version: CATALOG_VERSION.to_string() })
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| CatalogError::Io { path: path.into(), source };
    let mut out = BufWriter::new(fs::File::create(path).map_err(io_err)?);
    write_corpus(corpus, &mut out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn write_corpus(corpus: &Corpus, out: &mut impl Write) -> std::io::Result<()> {
    for q in &corpus.queries {
        serde_json::to_writer(&mut *out, q)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// A (query, question) pair with its validity label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triplet<'a> {
    pub query: &'a AnnotatedQuery,
    pub cq: &'a ClarificationQuestion,
    pub label: u8,
}

/// One triplet per (query, catalog question), queries in corpus order and
/// questions by ascending id.
pub fn make_triplets<'a>(corpus: &'a Corpus, catalog: &'a Catalog) -> Vec<Triplet<'a>> {
    let mut out = Vec::with_capacity(corpus.len() * catalog.len());
    for query in &corpus.queries {
        for cq in catalog {
            let label = query.valid_cq_ids.contains(&cq.id) as u8;
            out.push(Triplet { query, cq, label });
        }
    }
    out
}

/// How queries are assigned to the two sides of a split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// Every query is placed independently.
    #[default]
    PerQuery,
    /// Augmented variants always land on the same side as their seed.
    GroupBySeed,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::PerQuery => "per-query",
            SplitMode::GroupBySeed => "group-by-seed",
        })
    }
}

/// Number of training queries for `n` queries: `round(fraction * n)`, halves
/// rounded away from zero.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (fraction * n as f64).round() as usize
}

/// Query-level seeded split; each side keeps corpus order.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    split_corpus_with(corpus, train_fraction, seed, SplitMode::PerQuery)
}

pub fn split_corpus_with(
    corpus: &Corpus,
    train_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CatalogError::BadFraction(train_fraction));
    }
    if corpus.is_empty() {
        return Err(CatalogError::EmptyCorpus);
    }
    let n = corpus.len();
    let target = train_size(n, train_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; n];
    match mode {
        SplitMode::PerQuery => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for &i in &order[..target] {
                in_train[i] = true;
            }
        }
        SplitMode::GroupBySeed => {
            let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
            let mut index: HashMap<&str, usize> = HashMap::new();
            for (i, q) in corpus.queries.iter().enumerate() {
                let g = *index.entry(&q.seed_id).or_insert_with(|| {
                    groups.push((&q.seed_id, Vec::new()));
                    groups.len() - 1
                });
                groups[g].1.push(i);
            }
            groups.shuffle(&mut rng);
            let mut filled = 0;
            for (_, members) in &groups {
                if filled + members.len() <= target {
                    filled += members.len();
                    for &i in members {
                        in_train[i] = true;
                    }
                }
            }
        }
    }
    let (mut train, mut test) = (Vec::with_capacity(target), Vec::with_capacity(n - target));
    for (q, t) in corpus.queries.iter().zip(in_train) {
        if t { train.push(q.clone()) } else { test.push(q.clone()) }
    }
    let version = corpus.catalog_version.clone();
    Ok((
        Corpus { queries: train, catalog_version: version.clone() },
        Corpus { queries: test, catalog_version: version },
    ))
}
