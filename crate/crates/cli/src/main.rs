mod augment;
mod commands;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "qqse", version, about = "Clarification questions for developer web search queries")]
struct Cli {
    /// Catalog JSON to use instead of the built-in 16 questions.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow a seed corpus with masked-term variants.
    #[command(subcommand)]
    Augment(AugmentCommand),
    /// Train the ranker and save it.
    Train(TrainArgs),
    /// Score the model and baselines on the held-out split.
    Eval(EvalArgs),
    /// Rank the catalog for one query.
    Recommend(RecommendArgs),
    /// Run the HTTP service used by the browser extension.
    Serve(ServeArgs),
    /// Tally a feedback log.
    FeedbackSummary(FeedbackSummaryArgs),
    /// Write a seeded synthetic corpus and embedding table.
    Synth(SynthArgs),
}

#[derive(Subcommand, Debug)]
enum AugmentCommand {
    /// Turn seed queries into masked templates.
    Gen {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Template kinds to generate.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "add1,add2,replace1,replace2")]
        modes: Vec<Mode>,
    },
    /// Fill templates through a masked-language-model suggester.
    Expand {
        #[arg(long)]
        templates: PathBuf,
        /// Seed corpus, used to drop candidates equal to an existing query.
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Command speaking the line-delimited JSON protocol on stdin/stdout.
        #[arg(long, conflicts_with = "suggester_url", required_unless_present = "suggester_url")]
        suggester_cmd: Option<String>,
        /// Endpoint accepting one JSON request per POST.
        #[arg(long)]
        suggester_url: Option<String>,
        #[arg(long, default_value_t = qqse_core::augment::DEFAULT_TOP_K)]
        top_k: usize,
    },
    /// Accept or reject pending candidates at the terminal; resumable.
    Review {
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        journal: PathBuf,
    },
    /// Merge accepted candidates into the seed corpus.
    Finalize {
        #[arg(long)]
        seeds: PathBuf,
        #[arg(long)]
        candidates: PathBuf,
        #[arg(long)]
        journal: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Add1,
    Add2,
    Replace1,
    Replace2,
}

#[derive(ValueEnum, Clone, Copy, Debug, Default, PartialEq, Eq)]
enum Preset {
    #[default]
    Default,
    /// Settings tuned for `qqse synth` corpora.
    Synthetic,
}

#[derive(Args, Debug, Clone)]
struct SplitArgs {
    /// Fraction of queries used for training.
    #[arg(long, default_value_t = 0.8)]
    split_fraction: f64,
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    /// Keep augmented variants on the same side as their seed.
    #[arg(long)]
    group_by_seed: bool,
    /// Use the whole corpus instead of one side of a split.
    #[arg(long)]
    no_split: bool,
}

#[derive(Args, Debug, Clone)]
struct HyperArgs {
    #[arg(long, value_enum, default_value_t)]
    preset: Preset,
    /// JSON file of hyperparameters; missing fields keep the preset's values.
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Train the query-only ablation instead of the full network.
    #[arg(long)]
    query_only: bool,
    /// Spread each minibatch over all cores (not bitwise comparable with serial runs).
    #[arg(long)]
    parallel: bool,
    /// Where to write the per-epoch training report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    /// Trained model; omit to score baselines only.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    split: SplitArgs,
    /// Baselines to score, by name, or `all` / `none`.
    #[arg(long, value_delimiter = ',', default_value = "all")]
    baselines: Vec<String>,
    #[arg(long, default_value_t = 0)]
    random_seed: u64,
    /// Training settings for the query-only baseline (defaults to the model's).
    #[command(flatten)]
    hyper: HyperArgs,
    /// Also write the report rows as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    query: String,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, requires = "embeddings")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 8765)]
    port: u16,
    #[arg(long, default_value = "feedback.jsonl")]
    feedback_log: PathBuf,
}

#[derive(Args, Debug)]
struct FeedbackSummaryArgs {
    log: PathBuf,
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let catalog = match &cli.catalog {
        Some(p) => qqse_core::catalog::load_catalog(p)?,
        None => qqse_core::catalog::Catalog::shipped(),
    };
    match cli.command {
        Command::Augment(cmd) => augment::run(cmd),
        Command::Train(args) => commands::train(args, &catalog),
        Command::Eval(args) => commands::eval(args, &catalog),
        Command::Recommend(args) => commands::recommend(args, &catalog),
        Command::Serve(args) => commands::serve(args, catalog),
        Command::FeedbackSummary(args) => commands::feedback_summary(args),
        Command::Synth(args) => commands::synth(args, &catalog),
    }
}
