//! Masked-term augmentation of seed queries.
//!
//! Seeds become templates by adding one or two masks in the gaps between
//! terms or by replacing one or two terms with a mask. A [`Suggester`] fills
//! the masks, duplicates are dropped, and a human accepts or rejects each
//! candidate through an append-only review journal. Accepted candidates join
//! the seeds with the seed's valid questions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AnnotatedQuery, CatalogError, Corpus, Origin};
use crate::tokenize::tokenize;

/// Internal mask marker; cannot collide with a tokenized term.
pub const MASK: &str = "\u{2581}MASK\u{2581}";
/// How the mask is written in template files and suggester requests.
pub const MASK_TEXT: &str = "{mask}";
pub const DEFAULT_TOP_K: usize = 100;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("suggester failed on template {template}: {source}")]
    Suggester { template: String, source: SuggesterError },
    #[error("unknown candidate {0}")]
    UnknownCandidate(String),
    #[error("candidate {0} was already reviewed")]
    AlreadyDecided(String),
    #[error("{0} candidates are still pending review")]
    PendingCandidates(usize),
    #[error("candidate {candidate} refers to unknown seed {seed}")]
    UnknownSeed { candidate: String, seed: String },
    #[error(transparent)]
    Corpus(#[from] CatalogError),
}

#[derive(Debug, Error)]
pub enum SuggesterError {
    /// The backend could not be reached or stopped answering; worth a retry.
    #[error("transport: {0}")]
    Transport(String),
    #[error("protocol: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateMode {
    Add1,
    Add2,
    Replace1,
    Replace2,
}

impl TemplateMode {
    pub const ALL: [TemplateMode; 4] = [TemplateMode::Add1, TemplateMode::Add2, TemplateMode::Replace1, TemplateMode::Replace2];

    pub fn masks(self) -> usize {
        match self {
            TemplateMode::Add1 | TemplateMode::Replace1 => 1,
            TemplateMode::Add2 | TemplateMode::Replace2 => 2,
        }
    }

    fn key(self) -> &'static str {
        match self {
            TemplateMode::Add1 => "add1",
            TemplateMode::Add2 => "add2",
            TemplateMode::Replace1 => "replace1",
            TemplateMode::Replace2 => "replace2",
        }
    }
}

/// Reads and writes token lists with the mask as `{mask}`.
mod masked_tokens {
    use super::{MASK, MASK_TEXT};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tokens: &[String], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(tokens.iter().map(|t| if t == MASK { MASK_TEXT } else { t.as_str() }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        let raw = Vec::<String>::deserialize(d)?;
        Ok(raw.into_iter().map(|t| if t == MASK_TEXT { MASK.to_string() } else { t }).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedTemplate {
    /// `{source}/{mode}/{positions}`, positions joined by `-`.
    pub id: String,
    pub source_query_id: String,
    pub mode: TemplateMode,
    #[serde(with = "masked_tokens")]
    pub tokens: Vec<String>,
}

impl MaskedTemplate {
    fn new(source: &str, mode: TemplateMode, positions: &[usize], tokens: Vec<String>) -> Self {
        let pos: Vec<String> = positions.iter().map(|p| p.to_string()).collect();
        Self { id: format!("{source}/{}/{}", mode.key(), pos.join("-")), source_query_id: source.to_string(), mode, tokens }
    }

    pub fn mask_positions(&self) -> Vec<usize> {
        self.tokens.iter().enumerate().filter(|(_, t)| *t == MASK).map(|(i, _)| i).collect()
    }

    /// The template as text with `{mask}` placeholders.
    pub fn text(&self) -> String {
        self.tokens.iter().map(|t| if t == MASK { MASK_TEXT } else { t }).collect::<Vec<_>>().join(" ")
    }
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    match k {
        1 => (0..n).map(|i| vec![i]).collect(),
        2 => (0..n).flat_map(|i| (i + 1..n).map(move |j| vec![i, j])).collect(),
        _ => Vec::new(),
    }
}

/// One template per gap (n = 1) or per pair of distinct gaps (n = 2).
/// Gap `g` sits before token `g`; gap `T` is after the last token.
pub fn generate_add_templates(query: &AnnotatedQuery, n_masks: usize) -> Vec<MaskedTemplate> {
    let mode = match n_masks {
        1 => TemplateMode::Add1,
        2 => TemplateMode::Add2,
        _ => return Vec::new(),
    };
    let t = query.tokens.len();
    subsets(t + 1, n_masks)
        .into_iter()
        .map(|gaps| {
            let mut tokens = Vec::with_capacity(t + n_masks);
            for (i, tok) in query.tokens.iter().enumerate() {
                if gaps.contains(&i) {
                    tokens.push(MASK.to_string());
                }
                tokens.push(tok.clone());
            }
            if gaps.contains(&t) {
                tokens.push(MASK.to_string());
            }
            MaskedTemplate::new(&query.id, mode, &gaps, tokens)
        })
        .collect()
}

/// One template per subset of `n_masks` token positions; empty when the
/// query is too short.
pub fn generate_replace_templates(query: &AnnotatedQuery, n_masks: usize) -> Vec<MaskedTemplate> {
    let mode = match n_masks {
        1 => TemplateMode::Replace1,
        2 => TemplateMode::Replace2,
        _ => return Vec::new(),
    };
    subsets(query.tokens.len(), n_masks)
        .into_iter()
        .map(|pos| {
            let mut tokens = query.tokens.clone();
            for &p in &pos {
                tokens[p] = MASK.to_string();
            }
            MaskedTemplate::new(&query.id, mode, &pos, tokens)
        })
        .collect()
}

/// Templates of the requested modes for every query, in corpus order.
pub fn generate_templates(corpus: &Corpus, modes: &[TemplateMode]) -> Vec<MaskedTemplate> {
    let mut out = Vec::new();
    for q in &corpus.queries {
        for &mode in modes {
            out.extend(match mode {
                TemplateMode::Add1 | TemplateMode::Add2 => generate_add_templates(q, mode.masks()),
                TemplateMode::Replace1 | TemplateMode::Replace2 => generate_replace_templates(q, mode.masks()),
            });
        }
    }
    out
}

/// Wire request: template tokens with `{mask}` placeholders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggesterRequest {
    pub tokens: Vec<String>,
    pub mask_positions: Vec<usize>,
    pub top_k: usize,
}

impl SuggesterRequest {
    pub fn for_template(template: &MaskedTemplate, top_k: usize) -> Self {
        let tokens = template.tokens.iter().map(|t| if t == MASK { MASK_TEXT.to_string() } else { t.clone() }).collect();
        Self { tokens, mask_positions: template.mask_positions(), top_k }
    }
}

/// One ranked list of fillers per mask position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggesterResponse {
    pub suggestions: Vec<Vec<String>>,
}

impl SuggesterResponse {
    fn check(&self, request: &SuggesterRequest) -> Result<(), SuggesterError> {
        if self.suggestions.len() != request.mask_positions.len() {
            return Err(SuggesterError::Protocol(format!(
                "{} suggestion lists for {} masks",
                self.suggestions.len(),
                request.mask_positions.len()
            )));
        }
        for s in self.suggestions.iter().flatten() {
            if s.trim().is_empty() || s.contains(MASK) || s.contains(MASK_TEXT) {
                return Err(SuggesterError::Protocol(format!("invalid suggestion {s:?}")));
            }
        }
        Ok(())
    }
}

/// A masked-term completion backend.
pub trait Suggester {
    fn suggest(&self, request: &SuggesterRequest) -> Result<SuggesterResponse, SuggesterError>;
}

/// Returns fixed lists: `lists[i]` for mask `i`, the last list for any
/// further masks. Useful offline and in tests.
#[derive(Debug, Clone, Default)]
pub struct StaticSuggester {
    lists: Vec<Vec<String>>,
}

impl StaticSuggester {
    pub fn new(lists: Vec<Vec<String>>) -> Self {
        Self { lists }
    }

    pub fn uniform<S: Into<String>>(list: impl IntoIterator<Item = S>) -> Self {
        Self { lists: vec![list.into_iter().map(Into::into).collect()] }
    }
}

impl Suggester for StaticSuggester {
    fn suggest(&self, request: &SuggesterRequest) -> Result<SuggesterResponse, SuggesterError> {
        let suggestions = (0..request.mask_positions.len())
            .map(|i| {
                let list = self.lists.get(i).or(self.lists.last()).cloned().unwrap_or_default();
                list.into_iter().take(request.top_k).collect()
            })
            .collect();
        Ok(SuggesterResponse { suggestions })
    }
}

/// Speaks newline-delimited JSON with a child process: one request line in,
/// one response line out.
pub struct SubprocessSuggester {
    child: Child,
    io: Mutex<(ChildStdin, BufReader<ChildStdout>)>,
}

impl SubprocessSuggester {
    pub fn spawn(program: &str, args: &[String]) -> Result<Self, SuggesterError> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| SuggesterError::Transport(format!("spawn {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { child, io: Mutex::new((stdin, stdout)) })
    }
}

impl Suggester for SubprocessSuggester {
    fn suggest(&self, request: &SuggesterRequest) -> Result<SuggesterResponse, SuggesterError> {
        let mut io = self.io.lock().map_err(|_| SuggesterError::Transport("suggester pipe poisoned".into()))?;
        let (stdin, stdout) = &mut *io;
        let mut line = serde_json::to_string(request).expect("request serializes");
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| SuggesterError::Transport(e.to_string()))?;
        let mut reply = String::new();
        let n = stdout.read_line(&mut reply).map_err(|e| SuggesterError::Transport(e.to_string()))?;
        if n == 0 {
            return Err(SuggesterError::Transport("suggester closed its output".into()));
        }
        serde_json::from_str(&reply).map_err(|e| SuggesterError::Protocol(e.to_string()))
    }
}

impl Drop for SubprocessSuggester {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// POSTs each request as JSON to a URL.
pub struct HttpSuggester {
    url: String,
    agent: ureq::Agent,
}

impl HttpSuggester {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into(), agent: ureq::Agent::new_with_defaults() }
    }
}

impl Suggester for HttpSuggester {
    fn suggest(&self, request: &SuggesterRequest) -> Result<SuggesterResponse, SuggesterError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .send_json(request)
            .map_err(|e| SuggesterError::Transport(e.to_string()))?;
        resp.body_mut().read_json().map_err(|e| SuggesterError::Protocol(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateStatus {
    Pending,
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NotUnique,
    NotSeRelated,
    Noisy,
    CqNotApplicable,
}

impl RejectReason {
    pub const ALL: [RejectReason; 4] =
        [RejectReason::NotUnique, RejectReason::NotSeRelated, RejectReason::Noisy, RejectReason::CqNotApplicable];

    pub fn key(self) -> &'static str {
        match self {
            RejectReason::NotUnique => "not_unique",
            RejectReason::NotSeRelated => "not_se_related",
            RejectReason::Noisy => "noisy",
            RejectReason::CqNotApplicable => "cq_not_applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationCandidate {
    /// `{template id}/{rank}`.
    pub id: String,
    pub tokens: Vec<String>,
    pub source_query_id: String,
    pub template_id: String,
    pub suggester_rank: usize,
    pub status: CandidateStatus,
    #[serde(default)]
    pub reject_reason: Option<RejectReason>,
}

impl AugmentationCandidate {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

fn fill(template: &MaskedTemplate, positions: &[usize], fillers: &[Vec<String>]) -> Vec<String> {
    let mut out = Vec::with_capacity(template.tokens.len() + fillers.len());
    for (i, tok) in template.tokens.iter().enumerate() {
        match positions.iter().position(|&p| p == i) {
            Some(m) => out.extend(fillers[m].iter().cloned()),
            None => out.push(tok.clone()),
        }
    }
    out
}

/// Fills each template's masks from the suggester. Two-mask templates pair
/// the suggestions of equal rank. A suggestion that tokenizes to nothing
/// drops that rank. Output is ordered by template, then rank.
pub fn expand_templates(
    templates: &[MaskedTemplate],
    suggester: &dyn Suggester,
    top_k: usize,
) -> Result<Vec<AugmentationCandidate>, AugmentError> {
    let mut out = Vec::new();
    for template in templates {
        let request = SuggesterRequest::for_template(template, top_k);
        let response = suggester
            .suggest(&request)
            .and_then(|r| r.check(&request).map(|_| r))
            .map_err(|source| AugmentError::Suggester { template: template.id.clone(), source })?;
        let depth = response.suggestions.iter().map(Vec::len).min().unwrap_or(0).min(top_k);
        for rank in 1..=depth {
            let fillers: Vec<Vec<String>> = response.suggestions.iter().map(|list| tokenize(&list[rank - 1])).collect();
            if fillers.iter().any(Vec::is_empty) {
                continue;
            }
            out.push(AugmentationCandidate {
                id: format!("{}/{rank}", template.id),
                tokens: fill(template, &request.mask_positions, &fillers),
                source_query_id: template.source_query_id.clone(),
                template_id: template.id.clone(),
                suggester_rank: rank,
                status: CandidateStatus::Pending,
                reject_reason: None,
            });
        }
    }
    Ok(out)
}

/// Drops candidates equal to a corpus query or to an earlier candidate.
pub fn dedupe_candidates(candidates: Vec<AugmentationCandidate>, existing: &Corpus) -> Vec<AugmentationCandidate> {
    let mut seen: HashSet<Vec<String>> = existing.queries.iter().map(|q| q.tokens.clone()).collect();
    candidates.into_iter().filter(|c| seen.insert(c.tokens.clone())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReviewDecision {
    Accept,
    Reject(RejectReason),
}

/// One line of the review journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub candidate_id: String,
    pub decision: JournalDecision,
    pub reason: Option<RejectReason>,
    pub ts: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JournalDecision {
    Accept,
    Reject,
}

impl JournalEntry {
    pub fn new(candidate_id: impl Into<String>, decision: ReviewDecision) -> Self {
        let (decision, reason) = match decision {
            ReviewDecision::Accept => (JournalDecision::Accept, None),
            ReviewDecision::Reject(r) => (JournalDecision::Reject, Some(r)),
        };
        Self {
            candidate_id: candidate_id.into(),
            decision,
            reason,
            ts: Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true),
        }
    }

    pub fn decision(&self) -> Result<ReviewDecision, String> {
        match (self.decision, self.reason) {
            (JournalDecision::Accept, None) => Ok(ReviewDecision::Accept),
            (JournalDecision::Reject, Some(r)) => Ok(ReviewDecision::Reject(r)),
            (JournalDecision::Accept, Some(_)) => Err("accept with a reason".into()),
            (JournalDecision::Reject, None) => Err("reject without a reason".into()),
        }
    }
}

/// Candidates under review, indexed by id.
#[derive(Debug, Clone)]
pub struct ReviewSession {
    candidates: Vec<AugmentationCandidate>,
    index: HashMap<String, usize>,
}

impl ReviewSession {
    pub fn new(candidates: Vec<AugmentationCandidate>) -> Self {
        let index = candidates.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        Self { candidates, index }
    }

    pub fn decide(&mut self, candidate_id: &str, decision: ReviewDecision) -> Result<(), AugmentError> {
        let &i = self.index.get(candidate_id).ok_or_else(|| AugmentError::UnknownCandidate(candidate_id.to_string()))?;
        let c = &mut self.candidates[i];
        if c.status != CandidateStatus::Pending {
            return Err(AugmentError::AlreadyDecided(candidate_id.to_string()));
        }
        match decision {
            ReviewDecision::Accept => c.status = CandidateStatus::Accepted,
            ReviewDecision::Reject(r) => {
                c.status = CandidateStatus::Rejected;
                c.reject_reason = Some(r);
            }
        }
        Ok(())
    }

    /// Re-applies a journal, e.g. to resume an interrupted session.
    pub fn replay(&mut self, entries: &[JournalEntry]) -> Result<(), AugmentError> {
        for (i, e) in entries.iter().enumerate() {
            let d = e.decision().map_err(|message| AugmentError::Parse { line: i + 1, message })?;
            self.decide(&e.candidate_id, d)?;
        }
        Ok(())
    }

    pub fn pending(&self) -> impl Iterator<Item = &AugmentationCandidate> {
        self.candidates.iter().filter(|c| c.status == CandidateStatus::Pending)
    }

    pub fn candidates(&self) -> &[AugmentationCandidate] {
        &self.candidates
    }

    pub fn into_candidates(self) -> Vec<AugmentationCandidate> {
        self.candidates
    }
}

/// Applies decisions in order; the first invalid one aborts.
pub fn review_candidates(
    candidates: Vec<AugmentationCandidate>,
    decisions: impl IntoIterator<Item = (String, ReviewDecision)>,
) -> Result<Vec<AugmentationCandidate>, AugmentError> {
    let mut session = ReviewSession::new(candidates);
    for (id, d) in decisions {
        session.decide(&id, d)?;
    }
    Ok(session.into_candidates())
}

/// Append-only writer for review decisions; every entry is flushed.
pub struct ReviewJournal {
    out: BufWriter<File>,
    path: String,
}

impl ReviewJournal {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, AugmentError> {
        let p = path.as_ref();
        let file = OpenOptions::new().create(true).append(true).open(p).map_err(|source| io_err(p, source))?;
        Ok(Self { out: BufWriter::new(file), path: p.display().to_string() })
    }

    pub fn append(&mut self, entry: &JournalEntry) -> Result<(), AugmentError> {
        let line = serde_json::to_string(entry).expect("entry serializes");
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|source| AugmentError::Io { path: self.path.clone(), source })
    }
}

/// Seeds plus accepted candidates, which inherit their seed's questions.
pub fn finalize_augmented_corpus(seeds: &Corpus, reviewed: &[AugmentationCandidate]) -> Result<Corpus, AugmentError> {
    let pending = reviewed.iter().filter(|c| c.status == CandidateStatus::Pending).count();
    if pending > 0 {
        return Err(AugmentError::PendingCandidates(pending));
    }
    let by_id: HashMap<&str, &BTreeSet<u8>> = seeds.queries.iter().map(|q| (q.id.as_str(), &q.valid_cq_ids)).collect();
    let mut queries = seeds.queries.clone();
    for c in reviewed.iter().filter(|c| c.status == CandidateStatus::Accepted) {
        let valid = by_id.get(c.source_query_id.as_str()).ok_or_else(|| AugmentError::UnknownSeed {
            candidate: c.id.clone(),
            seed: c.source_query_id.clone(),
        })?;
        queries.push(AnnotatedQuery {
            id: c.id.clone(),
            tokens: c.tokens.clone(),
            valid_cq_ids: (*valid).clone(),
            origin: Origin::Augmented,
            seed_id: c.source_query_id.clone(),
        });
    }
    Ok(Corpus::new(queries)?)
}

fn io_err(path: &Path, source: std::io::Error) -> AugmentError {
    AugmentError::Io { path: path.display().to_string(), source }
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, AugmentError> {
    let p = path.as_ref();
    let file = File::open(p).map_err(|source| io_err(p, source))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| io_err(p, source))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AugmentError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), AugmentError> {
    let p = path.as_ref();
    let file = File::create(p).map_err(|source| io_err(p, source))?;
    let mut out = BufWriter::new(file);
    for item in items {
        let line = serde_json::to_string(item).expect("value serializes");
        writeln!(out, "{line}").map_err(|source| io_err(p, source))?;
    }
    out.flush().map_err(|source| io_err(p, source))
}

/// Reads a review journal; a missing file is an empty journal.
pub fn load_journal(path: impl AsRef<Path>) -> Result<Vec<JournalEntry>, AugmentError> {
    if !path.as_ref().exists() {
        return Ok(Vec::new());
    }
    read_jsonl(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(text: &str, cqs: &[u8]) -> AnnotatedQuery {
        AnnotatedQuery::seed("s1", text, cqs.iter().copied())
    }

    fn texts(ts: &[MaskedTemplate]) -> Vec<String> {
        ts.iter().map(MaskedTemplate::text).collect()
    }

    #[test]
    fn add_templates_for_java_mail_api() {
        let q = seed("java mail api", &[1, 2]);
        let one = generate_add_templates(&q, 1);
        assert_eq!(
            texts(&one),
            ["{mask} java mail api", "java {mask} mail api", "java mail {mask} api", "java mail api {mask}"]
        );
        assert_eq!(generate_add_templates(&q, 2).len(), 6);
        assert_eq!(generate_add_templates(&seed("java", &[1]), 1).len(), 2);
        assert!(one.iter().all(|t| t.mask_positions().len() == 1 && t.mode == TemplateMode::Add1));
    }

    #[test]
    fn replace_templates_for_java_mail_api() {
        let q = seed("java mail api", &[1, 2]);
        assert_eq!(texts(&generate_replace_templates(&q, 1)), ["{mask} mail api", "java {mask} api", "java mail {mask}"]);
        let two = texts(&generate_replace_templates(&q, 2));
        assert_eq!(two.len(), 3);
        assert!(two.contains(&"{mask} {mask} api".to_string()));
        assert!(generate_replace_templates(&seed("java", &[1]), 2).is_empty());
    }

    #[test]
    fn template_ids_are_unique_and_stable() {
        let q = seed("java mail api", &[1]);
        let corpus = Corpus::new(vec![q]).unwrap();
        let all = generate_templates(&corpus, &TemplateMode::ALL);
        assert_eq!(all.len(), 4 + 6 + 3 + 3);
        let ids: HashSet<&str> = all.iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids.len(), all.len());
        assert_eq!(all[1].id, "s1/add1/1");
        assert_eq!(all[4].id, "s1/add2/0-1");
    }

    #[test]
    fn template_files_use_mask_text() {
        let t = &generate_add_templates(&seed("java api", &[1]), 1)[1];
        let json = serde_json::to_string(t).unwrap();
        assert!(json.contains(r#"["java","{mask}","api"]"#), "{json}");
        let back: MaskedTemplate = serde_json::from_str(&json).unwrap();
        assert_eq!(&back, t);
        assert_eq!(back.tokens[1], MASK);
    }

    #[test]
    fn expansion_with_stub() {
        let t = generate_replace_templates(&seed("java mail api", &[1]), 1).remove(1);
        let stub = StaticSuggester::uniform(["mail", "stream"]);
        let c = expand_templates(std::slice::from_ref(&t), &stub, DEFAULT_TOP_K).unwrap();
        assert_eq!(c.iter().map(|c| (c.text(), c.suggester_rank)).collect::<Vec<_>>(), [
            ("java mail api".to_string(), 1),
            ("java stream api".to_string(), 2)
        ]);
        assert_eq!(c[0].id, "s1/replace1/1/1");
        assert!(c.iter().all(|c| c.status == CandidateStatus::Pending));

        let empty = StaticSuggester::uniform(Vec::<String>::new());
        assert!(expand_templates(&[t], &empty, DEFAULT_TOP_K).unwrap().is_empty());
    }

    #[test]
    fn two_masks_pair_equal_ranks() {
        let t = generate_replace_templates(&seed("java mail api", &[1]), 2).remove(0);
        let stub = StaticSuggester::new(vec![vec!["secure".into(), "python".into(), "x".into()], vec!["mail".into(), "smtp".into()]]);
        let c = expand_templates(&[t], &stub, 100).unwrap();
        assert_eq!(c.iter().map(AugmentationCandidate::text).collect::<Vec<_>>(), ["secure mail api", "python smtp api"]);
    }

    #[test]
    fn top_k_limits_and_bad_suggestions() {
        let t = generate_add_templates(&seed("java", &[1]), 1).remove(0);
        let stub = StaticSuggester::uniform(["a", "!!", "Mac OS", "d"]);
        let c = expand_templates(std::slice::from_ref(&t), &stub, 3).unwrap();
        assert_eq!(c.iter().map(|c| (c.text(), c.suggester_rank)).collect::<Vec<_>>(), [
            ("a java".to_string(), 1),
            ("mac os java".to_string(), 3)
        ]);

        struct Broken;
        impl Suggester for Broken {
            fn suggest(&self, _: &SuggesterRequest) -> Result<SuggesterResponse, SuggesterError> {
                Ok(SuggesterResponse { suggestions: vec![vec!["{mask}".into()]] })
            }
        }
        let err = expand_templates(&[t], &Broken, 3).unwrap_err();
        assert!(matches!(err, AugmentError::Suggester { ref template, .. } if template == "s1/add1/0"));
    }

    fn candidate(id: &str, text: &str) -> AugmentationCandidate {
        AugmentationCandidate {
            id: id.into(),
            tokens: tokenize(text),
            source_query_id: "s1".into(),
            template_id: "t".into(),
            suggester_rank: 1,
            status: CandidateStatus::Pending,
            reject_reason: None,
        }
    }

    #[test]
    fn dedupe_against_corpus_and_earlier() {
        let corpus = Corpus::new(vec![seed("java mail api", &[1, 2])]).unwrap();
        let out = dedupe_candidates(
            vec![
                candidate("a", "java mail api"),
                candidate("b", "secure mail api"),
                candidate("c", "python mail api"),
                candidate("d", "secure mail api"),
            ],
            &corpus,
        );
        assert_eq!(out.iter().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["b", "c"]);
    }

    #[test]
    fn review_and_finalize() {
        let seeds = Corpus::new(vec![seed("java mail api", &[1, 2])]).unwrap();
        let cands = vec![candidate("a", "secure mail api"), candidate("b", "java mail api tutorial"), candidate("c", "python mail api")];
        let reviewed = review_candidates(cands.clone(), [
            ("a".to_string(), ReviewDecision::Accept),
            ("b".to_string(), ReviewDecision::Reject(RejectReason::CqNotApplicable)),
        ])
        .unwrap();
        assert_eq!(reviewed[1].reject_reason, Some(RejectReason::CqNotApplicable));
        assert!(matches!(finalize_augmented_corpus(&seeds, &reviewed), Err(AugmentError::PendingCandidates(1))));

        let reviewed = review_candidates(reviewed, [("c".to_string(), ReviewDecision::Accept)]).unwrap();
        let out = finalize_augmented_corpus(&seeds, &reviewed).unwrap();
        assert_eq!(out.len(), 3);
        let secure = out.queries.iter().find(|q| q.text() == "secure mail api").unwrap();
        assert_eq!(secure.valid_cq_ids, BTreeSet::from([1, 2]));
        assert_eq!((secure.origin, secure.seed_id.as_str()), (Origin::Augmented, "s1"));

        assert!(matches!(
            review_candidates(cands.clone(), [("zzz".to_string(), ReviewDecision::Accept)]),
            Err(AugmentError::UnknownCandidate(_))
        ));
        assert!(matches!(
            review_candidates(cands, [("a".to_string(), ReviewDecision::Accept), ("a".to_string(), ReviewDecision::Accept)]),
            Err(AugmentError::AlreadyDecided(_))
        ));
    }

    #[test]
    fn journal_resumes_a_session() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("journal.jsonl");
        {
            let mut j = ReviewJournal::open(&path).unwrap();
            j.append(&JournalEntry::new("a", ReviewDecision::Accept)).unwrap();
        }
        {
            let mut j = ReviewJournal::open(&path).unwrap();
            j.append(&JournalEntry::new("b", ReviewDecision::Reject(RejectReason::Noisy))).unwrap();
        }
        let entries = load_journal(&path).unwrap();
        assert_eq!(entries.len(), 2);
        let raw = std::fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(raw.lines().nth(1).unwrap()).unwrap();
        assert_eq!(v["decision"], "reject");
        assert_eq!(v["reason"], "noisy");
        assert!(chrono::DateTime::parse_from_rfc3339(v["ts"].as_str().unwrap()).is_ok());

        let mut session = ReviewSession::new(vec![candidate("a", "x y"), candidate("b", "y z"), candidate("c", "z w")]);
        session.replay(&entries).unwrap();
        assert_eq!(session.pending().map(|c| c.id.as_str()).collect::<Vec<_>>(), ["c"]);
        assert!(load_journal(dir.path().join("missing.jsonl")).unwrap().is_empty());
    }
}
