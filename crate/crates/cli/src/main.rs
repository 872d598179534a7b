//! `logicx` command-line driver.

mod artifact;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "logicx",
    version,
    about = "Logic-rule explanations for graph neural networks"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "logicx-out")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load a JSONL or TU dataset and write it as split-tagged JSONL.
    Ingest(IngestArgs),
    /// Train the reference GCN and export node embeddings.
    TrainRefGnn(TrainArgs),
    /// Mine hidden predicates and learn class-wise DNF rules.
    Extract(ExtractArgs),
    /// Ground predicates in input-space rules and representatives.
    Ground(GroundArgs),
    /// Apply the rules to graphs and write per-graph verdicts.
    Infer(InferArgs),
    /// Fidelity, coverage, stability and validity of an explanation.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic motif dataset.
    Synth(SynthArgs),
    /// Write DOT files for representatives and orbit templates.
    ExportDot(ExportDotArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "jsonl")]
    pub format: String,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Comma-separated symbols for one-hot feature dimensions.
    #[arg(long, value_delimiter = ',')]
    pub symbols: Option<Vec<String>>,
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// Defaults to `<out-dir>/dataset.jsonl`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Defaults to `<out-dir>/embeddings.jsonl`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, short = 'L', default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub emb_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Receptive-field radius; defaults to the embedding layer count.
    #[arg(long, short = 'L')]
    pub layers: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    #[arg(long, default_value_t = 1)]
    pub min_support: usize,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub anchor_center: bool,
    /// Target train accuracy of the embedding tree.
    #[arg(long, default_value_t = 0.95)]
    pub emb_target: f64,
    #[arg(long, default_value_t = 8)]
    pub emb_max_depth: usize,
    #[arg(long, default_value_t = 5)]
    pub emb_min_leaf: usize,
}

#[derive(Args, Debug)]
pub struct GroundArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Defaults to `<out-dir>/predicates.json`.
    #[arg(long)]
    pub predicates: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub orbit_cap: usize,
    /// Depth of the per-structure grounding trees.
    #[arg(long, default_value_t = 8)]
    pub ground_depth: usize,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Grounded,
    Structural,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    Top1,
    Any,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Test,
    Train,
}

#[derive(Args, Debug)]
pub struct ExplanationArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Defaults to `<out-dir>/rules.json`.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Defaults to `<out-dir>/grounding.json`.
    #[arg(long)]
    pub grounding: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "grounded")]
    pub match_mode: ModeArg,
    /// Seconds per (pattern, graph) match; 0 disables the limit.
    #[arg(long, default_value_t = 10.0)]
    pub match_timeout: f64,
}

#[derive(Args, Debug)]
pub struct InferArgs {
    #[command(flatten)]
    pub explanation: ExplanationArgs,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub explanation: ExplanationArgs,
    #[arg(long, value_enum, default_value = "top1")]
    pub coverage_basis: BasisArg,
    /// Class weights for Fid_D.
    #[arg(long, value_enum, default_value = "test")]
    pub weight_basis: WeightArg,
    /// `forms.json` files of other runs for the stability score.
    #[arg(long)]
    pub compare: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    pub n_graphs: usize,
    #[arg(long, default_value_t = 20)]
    pub base_nodes: usize,
    #[arg(long, default_value_t = 1)]
    pub attachment: usize,
    /// Comma-separated subset of H, W, G.
    #[arg(long, value_delimiter = ',', default_value = "H,W,G")]
    pub motifs: Vec<String>,
    #[arg(long, default_value_t = 0.5)]
    pub plant_probability: f64,
    #[arg(long, default_value = "H&W|H&G|W&G")]
    pub rule: String,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Also write oracle embeddings with this noise amplitude.
    #[arg(long)]
    pub oracle_noise: Option<f64>,
    #[arg(long, short = 'L', default_value_t = 2)]
    pub layers: usize,
}

#[derive(Args, Debug)]
pub struct ExportDotArgs {
    /// Defaults to `<out-dir>/grounding.json`.
    #[arg(long)]
    pub grounding: Option<PathBuf>,
    /// Only this predicate; all by default.
    #[arg(long)]
    pub predicate: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LOGICX_LOG", "warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err
                .chain()
                .find_map(|e| e.downcast_ref::<logicx::Error>())
                .map_or("error", logicx::Error::kind);
            let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
            let body = serde_json::json!({
                "error": {
                    "kind": kind,
                    "message": err.to_string(),
                    "causes": &chain[1..],
                }
            });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
