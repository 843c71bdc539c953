use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};

use qqse_core::catalog::{load_corpus, save_corpus, split_corpus_with, Catalog, Corpus, SplitMode};
use qqse_core::embeddings::load_embeddings;
use qqse_core::model::{load_model, save_model, train_with_options, HyperParams, QuestionRanker, TrainOptions};
use qqse_core::ranking::{
    evaluate, query_only_variant, render_table, BaselineKind, RandomScorer, SimilarEmbeddingScorer,
};
use qqse_core::recommend::{top_recommendation, ScoredRanking, SERVING_THRESHOLD};
use qqse_core::serve::{bind_address, AppState, FeedbackWriter, BIND_ENV};
use qqse_core::synthetic::{generate, synthetic_hyper, SyntheticConfig};
use qqse_core::{tokenize, EmbeddingTable, EvalReport, Scorer};

use crate::{EvalArgs, FeedbackSummaryArgs, HyperArgs, Preset, RecommendArgs, ServeArgs, SplitArgs, SynthArgs, TrainArgs};

/// (train side, test side); both are the whole corpus with `--no-split`.
fn split(corpus: Corpus, args: &SplitArgs) -> anyhow::Result<(Corpus, Corpus)> {
    if args.no_split {
        return Ok((corpus.clone(), corpus));
    }
    let mode = if args.group_by_seed { SplitMode::GroupBySeed } else { SplitMode::PerQuery };
    Ok(split_corpus_with(&corpus, args.split_fraction, args.split_seed, mode)?)
}

fn embeddings(path: &Path) -> anyhow::Result<Arc<EmbeddingTable>> {
    let table = load_embeddings(path, None).with_context(|| format!("loading {}", path.display()))?;
    tracing::info!("{} embeddings of dimension {}", table.len(), table.dimension());
    Ok(Arc::new(table))
}

impl HyperArgs {
    /// Preset (or `base`), overlaid with the JSON file, then the flags.
    fn resolve(&self, base: Option<HyperParams>) -> anyhow::Result<HyperParams> {
        let start = match (self.preset, base) {
            (Preset::Synthetic, _) => synthetic_hyper(),
            (Preset::Default, Some(b)) => b,
            (Preset::Default, None) => HyperParams::default(),
        };
        let mut hp = match &self.hyper {
            Some(path) => {
                let mut merged = serde_json::to_value(&start)?;
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let overrides: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                let Some(fields) = overrides.as_object() else { bail!("{}: expected a JSON object", path.display()) };
                for (k, v) in fields {
                    merged[k] = v.clone();
                }
                serde_json::from_value(merged).with_context(|| format!("parsing {}", path.display()))?
            }
            None => start,
        };
        if let Some(e) = self.epochs {
            hp.max_epochs = e;
        }
        if let Some(s) = self.seed {
            hp.seed = s;
        }
        hp.validate()?;
        Ok(hp)
    }
}

pub fn train(args: TrainArgs, catalog: &Catalog) -> anyhow::Result<()> {
    let (train_set, test_set) = split(load_corpus(&args.corpus)?, &args.split)?;
    let table = embeddings(&args.embeddings)?;
    let mut hp = args.hyper.resolve(None)?;
    if args.query_only {
        hp = hp.query_only();
    }
    tracing::info!("training on {} queries ({} held out for testing)", train_set.len(), if args.split.no_split { 0 } else { test_set.len() });
    let (weights, report) = train_with_options(&train_set, catalog, &table, &hp, TrainOptions { parallel: args.parallel })?;
    save_model(&weights, &args.out)?;
    if let Some(path) = &args.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let best = &report.epochs[report.best_epoch - 1];
    println!(
        "saved {} ({} parameters); best epoch {} of {}, validation loss {:.4}, {:.1}s",
        args.out.display(),
        weights.parameter_count(),
        report.best_epoch,
        report.stopping_epoch,
        best.validation_loss,
        report.wall_time_secs
    );
    Ok(())
}

fn baseline_kinds(names: &[String]) -> anyhow::Result<Vec<BaselineKind>> {
    match names {
        [one] if one == "all" => return Ok(BaselineKind::ALL.to_vec()),
        [one] if one == "none" => return Ok(Vec::new()),
        _ => {}
    }
    names
        .iter()
        .map(|n| {
            BaselineKind::from_key(n.trim()).with_context(|| {
                let known: Vec<&str> = BaselineKind::ALL.iter().map(|k| k.key()).collect();
                format!("unknown baseline {n:?}; expected one of {}, all, none", known.join(", "))
            })
        })
        .collect()
}

pub fn eval(args: EvalArgs, catalog: &Catalog) -> anyhow::Result<()> {
    let kinds = baseline_kinds(&args.baselines)?;
    let (train_set, test_set) = split(load_corpus(&args.corpus)?, &args.split)?;
    let table = embeddings(&args.embeddings)?;

    let mut scorers: Vec<Box<dyn Scorer>> = Vec::new();
    let mut model_hyper = None;
    if let Some(path) = &args.model {
        let weights = load_model(path).with_context(|| format!("loading {}", path.display()))?;
        model_hyper = Some(weights.hyper.clone());
        scorers.push(Box::new(QuestionRanker::new(weights, table.clone(), catalog.clone())?));
    }
    for kind in kinds {
        let scorer: Box<dyn Scorer> = match kind {
            BaselineKind::Random => Box::new(RandomScorer::new(args.random_seed)),
            BaselineKind::QueryOnly => {
                let hp = args.hyper.resolve(model_hyper.clone())?;
                tracing::info!("training the query-only baseline on {} queries", train_set.len());
                Box::new(query_only_variant(&train_set, catalog, table.clone(), &hp)?.0)
            }
            _ => Box::new(SimilarEmbeddingScorer::for_kind(table.clone(), catalog, kind).expect("embedding baseline")),
        };
        scorers.push(scorer);
    }
    if scorers.is_empty() {
        bail!("nothing to evaluate: pass --model or some --baselines");
    }

    let reports = scorers
        .iter()
        .map(|s| evaluate(s.as_ref(), &test_set, catalog))
        .collect::<Result<Vec<EvalReport>, _>>()?;
    print!("{}", render_table(&reports));
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&reports)?).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn ranker(model: &Path, embeddings_path: &Path, catalog: &Catalog) -> anyhow::Result<QuestionRanker> {
    let weights = load_model(model).with_context(|| format!("loading {}", model.display()))?;
    Ok(QuestionRanker::new(weights, embeddings(embeddings_path)?, catalog.clone())?)
}

pub fn recommend(args: RecommendArgs, catalog: &Catalog) -> anyhow::Result<()> {
    let ranker = ranker(&args.model, &args.embeddings, catalog)?;
    let tokens = tokenize(&args.query);
    if tokens.is_empty() {
        bail!("the query has no searchable terms");
    }
    let ranking = ScoredRanking::new(ranker.scores(&tokens)?);
    let served = top_recommendation(&ranking, catalog, SERVING_THRESHOLD);
    if args.json {
        let rows: Vec<_> = ranking.iter().map(|(id, score)| serde_json::json!({ "cq_id": id, "score": score })).collect();
        println!("{}", serde_json::json!({ "ranking": rows, "recommendation": served }));
        return Ok(());
    }
    for (rank, (id, score)) in ranking.iter().enumerate() {
        let mark = if served.as_ref().is_some_and(|r| r.cq_id == id) { "*" } else { " " };
        let text = catalog.get(id).map(|q| q.text.as_str()).unwrap_or("");
        println!("{mark} {:>2}. CQ{id:<2} {score:.4}  {text}", rank + 1);
    }
    match served {
        Some(r) => println!("\nserved: CQ{} (answers: {})", r.cq_id, r.answers.join(", ")),
        None => println!("\nnothing served: best score is below {SERVING_THRESHOLD}"),
    }
    Ok(())
}

pub fn serve(args: ServeArgs, catalog: Catalog) -> anyhow::Result<()> {
    let ranker = match (&args.model, &args.embeddings) {
        (Some(m), Some(e)) => Some(Arc::new(ranker(m, e, &catalog)?)),
        _ => {
            tracing::warn!("no model given; /recommend will answer 503");
            None
        }
    };
    let addr = bind_address(args.port, std::env::var(BIND_ENV).ok().as_deref())?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let feedback = FeedbackWriter::open(&args.feedback_log).await?;
        qqse_core::serve::serve(addr, AppState::new(ranker, feedback)).await
    })?;
    Ok(())
}

pub fn feedback_summary(args: FeedbackSummaryArgs) -> anyhow::Result<()> {
    let s = qqse_core::serve::feedback_summary(&args.log).with_context(|| format!("reading {}", args.log.display()))?;
    if args.json {
        println!(
            "{}",
            serde_json::json!({
                "summary": s,
                "relevance_rate": s.relevance_rate(),
                "usefulness_rate": s.usefulness_rate(),
            })
        );
        return Ok(());
    }
    let pct = |r: Option<f64>| r.map_or("n/a".to_string(), |r| format!("{:.0}%", r * 100.0));
    println!("interactions      {}", s.total);
    println!("relevant          {} ({})", s.relevant, pct(s.relevance_rate()));
    println!("not relevant      {}", s.not_relevant);
    println!("useful: yes       {}", s.useful_yes);
    println!("useful: no        {}", s.useful_no);
    println!("useful: no answer {}", s.useful_no_answer);
    println!("usefulness        {}", pct(s.usefulness_rate()));
    if s.malformed > 0 {
        println!("malformed lines   {}", s.malformed);
    }
    Ok(())
}

pub fn synth(args: SynthArgs, catalog: &Catalog) -> anyhow::Result<()> {
    let data = generate(catalog, &SyntheticConfig { queries: args.queries, seed: args.seed, ..Default::default() });
    save_corpus(&data.corpus, &args.corpus)?;
    std::fs::write(&args.embeddings, data.table.to_glove_text()).with_context(|| format!("writing {}", args.embeddings.display()))?;
    println!(
        "{} queries -> {}, {} embeddings -> {} (train with --preset synthetic)",
        data.corpus.len(),
        args.corpus.display(),
        data.table.len(),
        args.embeddings.display()
    );
    Ok(())
}
