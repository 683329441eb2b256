//! `median-consensus` command-line tool.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Process exit codes. No others are used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success = 0,
    InputError = 1,
    BudgetExhausted = 3,
    Unsatisfiable = 4,
    VerificationFailed = 5,
}

#[derive(Debug, Parser, Serialize)]
#[command(name = "median-consensus", version, about = "Weighted-median opinion dynamics on influence networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Network file (dense CSV or JSON edge list, 1-based node numbers).
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Network file format; inferred from the extension when omitted.
    #[arg(long, global = true, value_enum)]
    pub format: Option<InputFormat>,
    /// Seed for every random choice (initial states and update schedules).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Maximum number of updates per run.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Number of independent runs.
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Size bound for exhaustive computations (meaning depends on the command).
    #[arg(long, global = true)]
    pub bound: Option<usize>,
    /// Output file; written atomically.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format for the primary product.
    #[arg(long, global = true, value_enum)]
    pub emit: Option<Emit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Json,
    Csv,
    Dot,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "name")]
pub enum Command {
    /// Run the dynamics once and record the trajectory.
    Simulate(SimulateArgs),
    /// Run many independent replicas and summarise the outcomes.
    Ensemble(EnsembleArgs),
    /// Report decisive links, reachability and maximal cohesive sets.
    Analyze,
    /// Check the consensus and dissensus conditions and decide reachability.
    Classify(ClassifyArgs),
    /// List every equilibrium over a small label set.
    Equilibria(EquilibriaArgs),
    /// Build an update sequence that drives a state to an equilibrium.
    Sequence(InitialArgs),
    /// Decide exactly whether consensus can be reached.
    Decide(DecideArgs),
    /// Encode a monotone NAE3SAT instance as an influence network.
    Reduce(ReduceArgs),
    /// Replay a consensus certificate against a network.
    VerifyCert(VerifyArgs),
    /// Write one of the built-in example networks.
    Generate(GenerateArgs),
}

#[derive(Debug, Args, Serialize)]
#[group(multiple = false)]
pub struct InitialArgs {
    /// File with one opinion per node (JSON array or separated values).
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// iid uniform opinions over the labels 0..K.
    #[arg(long, value_name = "K")]
    pub labels: Option<usize>,
    /// iid uniform opinions on the grid -1 + 2j/RES in [-1, 1].
    #[arg(long, value_name = "RES")]
    pub grid: Option<usize>,
    /// A random permutation of 0..n.
    #[arg(long)]
    pub distinct: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub init: InitialArgs,
    /// Fixed update sequence (JSON array, certificate file or plain indices)
    /// instead of uniform random picks.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Also write the final state as a CSV grid with `--cols` columns.
    #[arg(long, requires = "cols")]
    pub final_grid: Option<PathBuf>,
    #[arg(long)]
    pub cols: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub init: InitialArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ClassifyArgs {
    /// Node bound for maximal-cohesive-set enumeration.
    #[arg(long, default_value_t = median_consensus::cohesion::DEFAULT_ENUMERATION_BOUND)]
    pub cohesion_bound: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EquilibriaArgs {
    /// Number of labels (0..R).
    #[arg(long, default_value_t = 2, conflicts_with = "values")]
    pub labels: usize,
    /// Explicit opinion values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<String>>,
}

#[derive(Debug, Args, Serialize)]
pub struct DecideArgs {
    /// Also search over orderings of n distinct opinions.
    #[arg(long)]
    pub order_type: bool,
    /// Node bound for the ordering search.
    #[arg(long, default_value_t = median_consensus::equilibria::DEFAULT_ORDER_TYPE_BOUND)]
    pub order_bound: usize,
    /// Write the certificate here when consensus is reachable.
    #[arg(long)]
    pub cert_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReduceArgs {
    /// Instance file: `p nae3sat <vars> <clauses>` then one clause per line.
    #[arg(long)]
    pub instance: PathBuf,
    /// Solve the instance by brute force and build a certificate.
    #[arg(long)]
    pub solve: bool,
    /// Where to write the certificate produced by `--solve`.
    #[arg(long, requires = "solve")]
    pub cert_out: Option<PathBuf>,
    /// Replay this certificate against the generated network.
    #[arg(long)]
    pub verify_cert: Option<PathBuf>,
    /// Also decide reachability on the network and compare with the solver.
    #[arg(long)]
    pub check: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    /// Certificate file.
    #[arg(long)]
    pub cert: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fixture {
    Complete,
    CompleteNoLoops,
    Isolated,
    Ring,
    Cliques,
    Bridged,
    Star,
    Lattice,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    #[arg(value_enum)]
    pub kind: Fixture,
    /// Node count (complete, isolated, ring) or clique size (bridged).
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    /// Clique sizes for `cliques`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3,3")]
    pub sizes: Vec<usize>,
    /// Weight on the bridge for `bridged`.
    #[arg(long, default_value = "2/5")]
    pub bridge: String,
    #[arg(long, default_value_t = 3)]
    pub rows: usize,
    #[arg(long, default_value_t = 3)]
    pub cols: usize,
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MEDIAN_CONSENSUS_THREADS") {
        let threads: usize = v
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| anyhow::anyhow!("MEDIAN_CONSENSUS_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(Status::InputError as u8),
            };
        }
    };
    let status = configure_threads().and_then(|()| commands::dispatch(&cli));
    match status {
        Ok(s) => ExitCode::from(s as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::InputError as u8)
        }
    }
}
