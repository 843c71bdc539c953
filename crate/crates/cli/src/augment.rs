use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use anyhow::{bail, Context};

use qqse_core::augment::{
    dedupe_candidates, expand_templates, finalize_augmented_corpus, generate_templates, load_journal, read_jsonl,
    write_jsonl, AugmentationCandidate, HttpSuggester, JournalEntry, MaskedTemplate, RejectReason, ReviewDecision,
    ReviewJournal, ReviewSession, SubprocessSuggester, Suggester, TemplateMode,
};
use qqse_core::catalog::{load_corpus, save_corpus, Corpus};

use crate::{AugmentCommand, Mode};

impl From<Mode> for TemplateMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Add1 => TemplateMode::Add1,
            Mode::Add2 => TemplateMode::Add2,
            Mode::Replace1 => TemplateMode::Replace1,
            Mode::Replace2 => TemplateMode::Replace2,
        }
    }
}

pub fn run(cmd: AugmentCommand) -> anyhow::Result<()> {
    match cmd {
        AugmentCommand::Gen { seeds, out, modes } => {
            let seeds = load_corpus(&seeds)?;
            let modes: Vec<TemplateMode> = modes.into_iter().map(Into::into).collect();
            let templates = generate_templates(&seeds, &modes);
            write_jsonl(&out, &templates)?;
            println!("{} templates from {} seeds -> {}", templates.len(), seeds.len(), out.display());
        }
        AugmentCommand::Expand { templates, seeds, out, suggester_cmd, suggester_url, top_k } => {
            let templates: Vec<MaskedTemplate> = read_jsonl(&templates)?;
            let seeds = load_corpus(&seeds)?;
            let suggester: Box<dyn Suggester> = match (suggester_cmd, suggester_url) {
                (Some(cmd), _) => {
                    let mut parts = cmd.split_whitespace().map(String::from);
                    let program = parts.next().context("empty --suggester-cmd")?;
                    Box::new(SubprocessSuggester::spawn(&program, &parts.collect::<Vec<_>>())?)
                }
                (None, Some(url)) => Box::new(HttpSuggester::new(url)),
                (None, None) => bail!("one of --suggester-cmd or --suggester-url is required"),
            };
            let all = expand_templates(&templates, suggester.as_ref(), top_k)?;
            let total = all.len();
            let kept = dedupe_candidates(all, &seeds);
            write_jsonl(&out, &kept)?;
            println!("{} candidates ({} duplicates dropped) -> {}", kept.len(), total - kept.len(), out.display());
        }
        AugmentCommand::Review { candidates, seeds, journal } => {
            let seeds = load_corpus(&seeds)?;
            let mut session = resume(&candidates, &journal)?;
            let mut writer = ReviewJournal::open(&journal)?;
            let stdin = io::stdin();
            let done = review_loop(&mut session, &seeds, &mut writer, stdin.lock(), io::stdout())?;
            let left = session.pending().count();
            println!("{done} decisions recorded, {left} pending");
        }
        AugmentCommand::Finalize { seeds, candidates, journal, out } => {
            let seeds = load_corpus(&seeds)?;
            let session = resume(&candidates, &journal)?;
            let corpus = finalize_augmented_corpus(&seeds, session.candidates())?;
            save_corpus(&corpus, &out)?;
            println!(
                "{} queries ({} seeds + {} accepted), {} labels -> {}",
                corpus.len(),
                seeds.len(),
                corpus.len() - seeds.len(),
                corpus.label_count(),
                out.display()
            );
        }
    }
    Ok(())
}

fn resume(candidates: &std::path::Path, journal: &std::path::Path) -> anyhow::Result<ReviewSession> {
    let mut session = ReviewSession::new(read_jsonl(candidates)?);
    let entries = load_journal(journal)?;
    session.replay(&entries).with_context(|| format!("replaying {}", journal.display()))?;
    Ok(session)
}

const HELP: &str = "a = accept | 1 = not unique, 2 = not SE related, 3 = noisy, 4 = question not applicable | s = skip | q = quit";

fn parse_decision(input: &str) -> Option<Option<ReviewDecision>> {
    match input {
        "a" | "y" => Some(Some(ReviewDecision::Accept)),
        "1" | "2" | "3" | "4" => {
            let i: usize = input.parse().ok()?;
            Some(Some(ReviewDecision::Reject(RejectReason::ALL[i - 1])))
        }
        "s" => Some(None),
        _ => None,
    }
}

/// Prompts once per pending candidate and journals every decision as soon
/// as it is made. Stops at `q` or end of input; returns decisions made.
fn review_loop(
    session: &mut ReviewSession,
    seeds: &Corpus,
    journal: &mut ReviewJournal,
    mut input: impl BufRead,
    mut out: impl Write,
) -> anyhow::Result<usize> {
    let seed_text: HashMap<&str, String> = seeds.queries.iter().map(|q| (q.id.as_str(), q.text())).collect();
    let pending: Vec<AugmentationCandidate> = session.pending().cloned().collect();
    writeln!(out, "{} candidates pending. {HELP}", pending.len())?;
    let mut done = 0;
    'candidates: for (n, c) in pending.iter().enumerate() {
        let seed = seed_text.get(c.source_query_id.as_str()).map(String::as_str).unwrap_or("?");
        loop {
            write!(out, "[{}/{}] {:?}  (from {:?}) > ", n + 1, pending.len(), c.text(), seed)?;
            out.flush()?;
            let mut line = String::new();
            if input.read_line(&mut line)? == 0 {
                writeln!(out)?;
                break 'candidates;
            }
            let answer = line.trim();
            if answer == "q" {
                break 'candidates;
            }
            match parse_decision(answer) {
                Some(Some(d)) => {
                    session.decide(&c.id, d)?;
                    journal.append(&JournalEntry::new(c.id.clone(), d))?;
                    done += 1;
                    break;
                }
                Some(None) => break,
                None => writeln!(out, "{HELP}")?,
            }
        }
    }
    Ok(done)
}
