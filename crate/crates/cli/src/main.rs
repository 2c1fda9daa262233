mod commands;
mod config;
mod scorers;

use std::path::PathBuf;
use std::process::ExitCode;

use cascade_core::duo::AggregationMethod;
use clap::{Args, Parser, Subcommand, ValueEnum};
use scorers::{RemoteOpts, ScorerChoice};

#[derive(Debug, Parser)]
#[command(name = "cascade-rank", version, about = "Multi-stage ranking: BM25, pointwise and pairwise re-ranking")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Base seed for sampling and training.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and persist a BM25 index.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Run queries through the cascade and write a TREC run.
    Search(SearchArgs),
    /// Train a toy logistic scorer.
    TrainToy(TrainArgs),
    /// Score a run against relevance judgments.
    Evaluate(EvaluateArgs),
    /// Sweep stage budgets and write a cost/quality CSV.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
pub enum IndexAction {
    Build(BuildArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Collection TSV: `doc_id<TAB>text`.
    #[arg(long)]
    pub collection: PathBuf,
    /// Output index directory.
    #[arg(long)]
    pub out: PathBuf,
    /// BM25 term-frequency saturation.
    #[arg(long = "k1-sat", default_value_t = 0.9)]
    pub k1_sat: f64,
    /// BM25 length normalization.
    #[arg(long, default_value_t = 0.4)]
    pub b: f64,
    /// Apply English stemming.
    #[arg(long)]
    pub stem: bool,
    /// File with one stopword per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggName {
    Sum,
    Binary,
    Min,
    Max,
    Sample,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Queries TSV: `query_id<TAB>text`.
    #[arg(long)]
    pub queries: PathBuf,
    /// Candidates kept by BM25.
    #[arg(long)]
    pub k0: usize,
    /// Candidates kept by the pointwise stage; 0 disables the pairwise stage.
    #[arg(long)]
    pub k1: usize,
    #[arg(long, value_enum, default_value = "sum")]
    pub agg: AggName,
    /// Partners per candidate with `--agg sample`.
    #[arg(long)]
    pub sample_m: Option<usize>,
    /// Pointwise scorer: oracle, toy:<model>, remote:<url>.
    #[arg(long)]
    pub mono: ScorerChoice,
    /// Pairwise scorer: oracle, toy:<model>, remote:<url>.
    #[arg(long)]
    pub duo: Option<ScorerChoice>,
    /// Judgments, required by oracle scorers.
    #[arg(long)]
    pub qrels: Option<PathBuf>,
    #[arg(long)]
    pub run_out: PathBuf,
    /// Per-query inference counts as CSV.
    #[arg(long)]
    pub ledger_out: Option<PathBuf>,
    /// Pair probabilities as CSV `query_id,i_doc,j_doc,p`.
    #[arg(long)]
    pub dump_pairs: Option<PathBuf>,
    /// Run tag written in the last column.
    #[arg(long, default_value = "cascade")]
    pub tag: String,
    /// Override the index's BM25 saturation.
    #[arg(long = "k1-sat")]
    pub k1_sat: Option<f64>,
    /// Override the index's BM25 length normalization.
    #[arg(long)]
    pub b: Option<f64>,
    #[command(flatten)]
    pub remote: RemoteOpts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Mono,
    Duo,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labels TSV: `query_id<TAB>doc_id<TAB>label` with label 0 or 1.
    #[arg(long)]
    pub pairs: PathBuf,
    #[arg(long)]
    pub collection: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, value_enum, default_value = "mono")]
    pub kind: ModelKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricName {
    Mrr10,
    Map,
    Recall,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long, value_enum, default_value = "mrr10")]
    pub metric: MetricName,
    /// Cutoff for recall.
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    /// Print every metric (as percentages) instead of a single number.
    #[arg(long)]
    pub report: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub qrels: PathBuf,
    #[arg(long)]
    pub mono: ScorerChoice,
    #[arg(long)]
    pub duo: Option<ScorerChoice>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    pub k0: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,30,40,50")]
    pub k1: Vec<usize>,
    /// Aggregation methods to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sum")]
    pub methods: Vec<AggName>,
    /// Sample sizes, used by the sample method.
    #[arg(long, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Repetitions averaged per sample cell.
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "mrr10")]
    pub metric: MetricName,
    #[arg(long, default_value_t = 1000)]
    pub k: usize,
    /// Inferences counted on the cost axis: total, mono or duo.
    #[arg(long, default_value = "total")]
    pub cost: String,
    #[arg(long)]
    pub csv_out: PathBuf,
    #[command(flatten)]
    pub remote: RemoteOpts,
}

impl AggName {
    pub fn method(self, m: usize, seed: u64) -> AggregationMethod {
        match self {
            AggName::Sum => AggregationMethod::Sum,
            AggName::Binary => AggregationMethod::Binary,
            AggName::Min => AggregationMethod::Min,
            AggName::Max => AggregationMethod::Max,
            AggName::Sample => AggregationMethod::Sample { m, seed },
        }
    }
}

fn main() -> ExitCode {
    let args = match config::merge(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: configuring {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
