mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prefusion::Error;

use output::Format;

/// Conflict-driven clustering, prototype extraction and classification of
/// Dempster-Shafer evidence ahead of fusion.
#[derive(Debug, Parser)]
#[command(name = "prefusion", version)]
pub struct Cli {
    /// Base seed of every random choice. Required when the CI environment
    /// variable is set; defaults to 0 otherwise.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file; `-` or absent for stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scaling study on the all-subsets benchmark (N = 2^K − 1 reports into K clusters).
    Bench(BenchArgs),
    /// Compare annealing against exhaustive search on small random instances.
    OracleCompare(OracleArgs),
    /// Generate a synthetic multi-event NDJSON report corpus.
    GenCorpus(CorpusArgs),
    /// Cluster an NDJSON report file into K subsets.
    Cluster(ClusterArgs),
    /// Extract the prototype table from a clustering.
    Prototypes(PrototypeArgs),
    /// Classify reports against a prototype table.
    Classify(ClassifyArgs),
    /// Streaming pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
}

/// Annealing parameters; unset flags keep the defaults shown.
#[derive(Debug, Args, Clone, Default)]
pub struct AnnealArgs {
    /// Self-coupling γ [default: 0.5]
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Cluster-size balance α [default: 1e-6 for K=8, 3e-7 for K=10, 3e-8 for K=11, else 0]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Noise amplitude ε [default: 0.001]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Cooling factor τ [default: 0.9]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Inner-loop tolerance [default: 0.01]
    #[arg(long)]
    pub inner_tol: Option<f64>,
    /// Saturation stopping level [default: 0.99]
    #[arg(long)]
    pub saturation: Option<f64>,
    /// Temperature steps before giving up [default: 1000]
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Sweeps per temperature [default: 1000]
    #[arg(long)]
    pub max_inner: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Single benchmark size; overrides --k-range.
    #[arg(long)]
    pub k: Option<usize>,
    /// Inclusive K range as `lo..hi`.
    #[arg(long, default_value = "2..6")]
    pub k_range: String,
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// `fixed:<s>` or `range:<lo>,<hi>`.
    #[arg(long, default_value = "range:0.1,0.9")]
    pub support: String,
    /// Permit K ≥ 10 (slow, with large run-to-run fluctuation).
    #[arg(long)]
    pub allow_large: bool,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub q: usize,
    #[arg(long, default_value_t = 50)]
    pub instances: usize,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, default_value_t = 8)]
    pub frame_size: usize,
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 2)]
    pub events: usize,
    /// Probability that a report gets a random focus instead of its event's.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Support range `lo,hi`.
    #[arg(long, default_value = "0.3,0.9")]
    pub support: String,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// NDJSON reports; `-` for stdin.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

#[derive(Debug, Args)]
pub struct PrototypeArgs {
    /// Partition JSON written by `cluster`.
    #[arg(long)]
    pub partition: PathBuf,
    /// The reports that were clustered.
    #[arg(long)]
    pub input: PathBuf,
    /// Prototypes per cluster.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Rejection threshold stored in the table (required).
    #[arg(long)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Rejection threshold; defaults to the one stored in the table.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    /// Stream reports through filter, classifier and clustering epochs.
    ///
    /// Routing decisions go to the output as NDJSON, epoch summaries to
    /// stderr (or --log) as JSON lines. A line {"command": "epoch"} in the
    /// input forces an epoch.
    Run(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Flat TOML config; keys: p0, db2_capacity, aging_rate, gamma, alpha,
    /// epsilon, tau, inner_tol, saturation, seed, max_outer, max_inner,
    /// conflict_threshold, proto_count, initial_q, epoch_every.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: PathBuf,
    /// Per-subset conflict threshold (required here or in the config).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Reports between epochs [default: 64]
    #[arg(long)]
    pub epoch_every: Option<usize>,
    /// Summarization threshold p0 [default: 0.01]
    #[arg(long)]
    pub p0: Option<f64>,
    /// DB2 capacity [default: 256]
    #[arg(long)]
    pub db2_capacity: Option<usize>,
    /// Aging rate of the ranking score [default: 0]
    #[arg(long)]
    pub aging_rate: Option<f64>,
    /// Initial cluster count q [default: 2]
    #[arg(long)]
    pub initial_q: Option<usize>,
    /// Prototypes per cluster [default: 3]
    #[arg(long)]
    pub proto_count: Option<usize>,
    /// Directory receiving `state.json` after every epoch and at the end.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    /// Continue from `<snapshot>/state.json` when it exists.
    #[arg(long, requires = "snapshot")]
    pub resume: bool,
    /// Run one more epoch when the input ends.
    #[arg(long)]
    pub final_epoch: bool,
    /// Epoch log file instead of stderr.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub anneal: AnnealArgs,
}

/// Error raised by a command, tagged with its exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    NoConvergence(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::NoConvergence(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::NoConvergence(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            Error::NoConvergence { .. } => Failure::NoConvergence(e.to_string()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Validation(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
