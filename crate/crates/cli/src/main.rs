mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use egi::features::FeatureKind;
use egi::generators::Family;

/// Ego-graph pretraining lab: synthetic graphs, ego-graph gaps, EGI
/// pretraining and transfer studies.
#[derive(Debug, Parser)]
#[command(name = "egi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded family of random graphs as edge lists plus a manifest.
    Generate(GenerateArgs),
    /// Ego-graph Laplacian gap between a source graph and one or more targets.
    Gap(GapArgs),
    /// Pretrain an EGI encoder on one graph and save a checkpoint.
    Pretrain(PretrainArgs),
    /// Run a full transfer study and check its outcome.
    Repro(ReproArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// ff (forest fire) or ba (Barabási-Albert).
    #[arg(long, value_parser = parse_family)]
    family: Family,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 40)]
    count: usize,
    /// Seed of the first graph; graph i uses seed + i.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.4)]
    forward: f64,
    #[arg(long, default_value_t = 0.3)]
    backward: f64,
    /// Edges per new node for ba.
    #[arg(long, default_value_t = 2)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GapArgs {
    /// Source edge list.
    source: PathBuf,
    /// Target edge lists.
    #[arg(required = true)]
    targets: Vec<PathBuf>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Sampled ego pairs per estimate; 0 enumerates every pair.
    #[arg(long, default_value_t = 0)]
    pairs: usize,
    /// Independent sampled estimates (seeds seed, seed + 1, ...).
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Treat the edge lists as directed.
    #[arg(long)]
    directed: bool,
    /// Output CSV file; standard output if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct TrainArgs {
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 32)]
    hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Neighbours sampled per node when building training ego-graphs.
    #[arg(long, default_value_t = 10)]
    cap: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct PretrainArgs {
    /// Training graph edge list.
    graph: PathBuf,
    /// degree:d, constant:d or random:d.
    #[arg(long, default_value = "degree:3", value_parser = parse_feature)]
    feature: FeatureKind,
    #[command(flatten)]
    train: TrainArgs,
    /// Output directory for checkpoint.json and loss.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Study {
    Synthetic,
    Airport,
}

#[derive(Debug, Args)]
struct ReproArgs {
    study: Study,
    /// Feature spec; synthetic runs both degree:3 and constant:3 when omitted,
    /// airport defaults to degree:10.
    #[arg(long, value_parser = parse_feature)]
    feature: Option<FeatureKind>,
    #[command(flatten)]
    train: TrainArgs,
    /// Training seeds (synthetic, default 5) or MLP runs (airport, default 100).
    #[arg(long)]
    runs: Option<usize>,
    /// Ego pairs per gap estimate; 0 enumerates every pair.
    #[arg(long, default_value_t = 0)]
    pairs: usize,
    /// Airport data directory (defaults to $EGI_AIRPORT_DIR or data/airport).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: egi::Error| e.to_string())
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse().map_err(|e: egi::Error| e.to_string())
}

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

/// Worker threads; results never depend on it.
const WORKERS_ENV: &str = "EGI_WORKERS";

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        // only fails if a pool already exists, which cannot happen this early
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Gap(a) => commands::gap(&a),
        Command::Pretrain(a) => commands::pretrain(&a),
        Command::Repro(a) => commands::repro(&a),
    };
    match result {
        Ok(commands::Status::Done) => ExitCode::SUCCESS,
        Ok(commands::Status::ChecksFailed) => ExitCode::from(EXIT_ACCEPTANCE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_DATA)
        }
    }
}
