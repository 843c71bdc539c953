use std::process::Command;

use axum::routing::post;
use axum::{Json, Router};

use qqse_core::augment::{
    dedupe_candidates, expand_templates, finalize_augmented_corpus, generate_templates, load_journal, read_jsonl,
    write_jsonl, AugmentationCandidate, HttpSuggester, JournalEntry, MaskedTemplate, RejectReason, ReviewDecision,
    ReviewJournal, ReviewSession, SubprocessSuggester, Suggester, SuggesterError, SuggesterRequest,
    SuggesterResponse, TemplateMode,
};
use qqse_core::catalog::{load_corpus, save_corpus, Corpus, Origin};
use qqse_core::AnnotatedQuery;

fn seeds() -> Corpus {
    Corpus::new(vec![
        AnnotatedQuery::seed("q1", "java mail api", [1, 2]),
        AnnotatedQuery::seed("q2", "python server", [3]),
    ])
    .unwrap()
}

fn python() -> Option<&'static str> {
    Command::new("python3").arg("--version").output().ok().filter(|o| o.status.success()).map(|_| "python3")
}

#[test]
fn subprocess_suggester_round_trip() {
    let Some(py) = python() else {
        eprintln!("python3 not available; skipping");
        return;
    };
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/stub_suggester.py").to_string();
    let stub = SubprocessSuggester::spawn(py, &[script]).unwrap();

    let templates = generate_templates(&seeds(), &[TemplateMode::Replace1, TemplateMode::Replace2]);
    let two = templates.iter().find(|t| t.text() == "{mask} {mask} api").unwrap();
    let resp = stub.suggest(&SuggesterRequest::for_template(two, 3)).unwrap();
    assert_eq!(resp.suggestions, [vec!["secure", "python", "tutorial"], vec!["server", "tutorial", "python"]]);
    let got = expand_templates(std::slice::from_ref(two), &stub, 2).unwrap();
    let texts: Vec<String> = got.iter().map(AugmentationCandidate::text).collect();
    assert_eq!(texts, ["secure server api", "python tutorial api"]);

    let all = expand_templates(&templates, &stub, 4).unwrap();
    let kept = dedupe_candidates(all.clone(), &seeds());
    assert!(kept.len() < all.len());
    assert!(kept.iter().all(|c| c.text() != "java mail api" && c.text() != "python server"));
    let mut texts: Vec<String> = kept.iter().map(AugmentationCandidate::text).collect();
    texts.sort();
    texts.dedup();
    assert_eq!(texts.len(), kept.len());
}

#[test]
fn dead_subprocess_is_a_transport_error() {
    let Ok(stub) = SubprocessSuggester::spawn("true", &[]) else { return };
    let t = &generate_templates(&seeds(), &[TemplateMode::Add1])[0];
    std::thread::sleep(std::time::Duration::from_millis(50));
    assert!(matches!(stub.suggest(&SuggesterRequest::for_template(t, 5)), Err(SuggesterError::Transport(_))));
}

#[test]
fn http_suggester_round_trip() {
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let app = Router::new().route(
        "/suggest",
        post(|Json(req): Json<SuggesterRequest>| async move {
            assert!(req.tokens.iter().any(|t| t == "{mask}"));
            Json(SuggesterResponse { suggestions: req.mask_positions.iter().map(|_| vec!["documentation".into()]).collect() })
        }),
    );
    rt.spawn(async move { axum::serve(listener, app).await.unwrap() });

    let http = HttpSuggester::new(format!("http://{addr}/suggest"));
    let t: Vec<MaskedTemplate> =
        generate_templates(&seeds(), &[TemplateMode::Add1]).into_iter().filter(|t| t.source_query_id == "q1").collect();
    let got = expand_templates(&t, &http, 10).unwrap();
    let texts: Vec<String> = got.iter().map(AugmentationCandidate::text).collect();
    assert!(texts.contains(&"java mail api documentation".to_string()));
    assert_eq!(got.len(), 4);

    let unreachable = HttpSuggester::new("http://127.0.0.1:9/suggest");
    assert!(expand_templates(&t, &unreachable, 10).is_err());
}

#[test]
fn file_pipeline_with_resumed_review() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = seeds();
    let stub = qqse_core::augment::StaticSuggester::uniform(["secure", "tutorial"]);
    let templates = generate_templates(&seeds, &TemplateMode::ALL);
    write_jsonl(dir.path().join("templates.jsonl"), &templates).unwrap();
    let templates: Vec<MaskedTemplate> = read_jsonl(dir.path().join("templates.jsonl")).unwrap();
    let candidates = dedupe_candidates(expand_templates(&templates, &stub, 100).unwrap(), &seeds);
    write_jsonl(dir.path().join("candidates.jsonl"), &candidates).unwrap();

    // first sitting: review half, then stop
    let journal_path = dir.path().join("review.jsonl");
    let mut session = ReviewSession::new(read_jsonl(dir.path().join("candidates.jsonl")).unwrap());
    let ids: Vec<String> = session.candidates().iter().map(|c| c.id.clone()).collect();
    let decide = |i: usize, c: &str| match () {
        _ if c.contains("tutorial") => ReviewDecision::Reject(RejectReason::CqNotApplicable),
        _ if i % 3 == 0 => ReviewDecision::Reject(RejectReason::Noisy),
        _ => ReviewDecision::Accept,
    };
    let texts: Vec<String> = session.candidates().iter().map(AugmentationCandidate::text).collect();
    let half = ids.len() / 2;
    {
        let mut journal = ReviewJournal::open(&journal_path).unwrap();
        for i in 0..half {
            let d = decide(i, &texts[i]);
            session.decide(&ids[i], d).unwrap();
            journal.append(&JournalEntry::new(ids[i].clone(), d)).unwrap();
        }
    }

    // second sitting resumes from the journal
    let mut resumed = ReviewSession::new(read_jsonl(dir.path().join("candidates.jsonl")).unwrap());
    let entries = load_journal(&journal_path).unwrap();
    assert_eq!(entries.len(), half);
    resumed.replay(&entries).unwrap();
    assert_eq!(resumed.pending().count(), ids.len() - half);
    assert!(finalize_augmented_corpus(&seeds, resumed.candidates()).is_err());
    for i in half..ids.len() {
        resumed.decide(&ids[i], decide(i, &texts[i])).unwrap();
        session.decide(&ids[i], decide(i, &texts[i])).unwrap();
    }
    assert_eq!(resumed.candidates(), session.candidates());

    let out = finalize_augmented_corpus(&seeds, resumed.candidates()).unwrap();
    let accepted = resumed.candidates().iter().filter(|c| c.reject_reason.is_none()).count();
    assert_eq!(out.len(), seeds.len() + accepted);
    for q in out.queries.iter().filter(|q| q.origin == Origin::Augmented) {
        let seed = seeds.queries.iter().find(|s| s.id == q.seed_id).unwrap();
        assert_eq!(q.valid_cq_ids, seed.valid_cq_ids);
        assert!(!q.text().contains("tutorial"));
    }
    let path = dir.path().join("augmented.jsonl");
    save_corpus(&out, &path).unwrap();
    assert_eq!(load_corpus(&path).unwrap(), out);
}
