//! `axmc`: run, continue, export and serve multi-objective tuning sessions.

mod commands;
mod schema;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "axmc",
    version,
    about = "Interactive multi-objective tuning of gradient boosted trees"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize a session, run a budget and write it to an output directory.
    Run(RunArgs),
    /// Restore a session directory, optionally re-steer, and run more budget.
    Continue(ContinueArgs),
    /// Print or write the Pareto front of a session directory.
    Front(FrontArgs),
    /// Serve the REST API (and the UI bundle, if given).
    Serve(ServeArgs),
    /// Write the synthetic income task: a CSV plus its schema sidecar.
    Synth(SynthArgs),
}

#[derive(Args, Clone, Debug)]
#[group(required = true, multiple = false)]
pub struct BudgetArgs {
    /// Optimizer iterations to run (0 runs only the initial design).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Wall-clock seconds to run instead of an iteration count.
    #[arg(long)]
    pub seconds: Option<f64>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct BoxArgs {
    /// Lower bound on the first weight (two-objective sessions).
    #[arg(long, requires = "wmax", conflicts_with = "weight_box")]
    pub wmin: Option<f64>,
    /// Upper bound on the first weight (two-objective sessions).
    #[arg(long, requires = "wmin", conflicts_with = "weight_box")]
    pub wmax: Option<f64>,
    /// JSON file with per-objective bounds `[[l1, u1], [l2, u2], ...]`.
    #[arg(long = "box", value_name = "FILE")]
    pub weight_box: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// CSV dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema sidecar; without it the schema is built from the header
    /// and `--target`, `--protected`, `--categorical`.
    #[arg(long, conflicts_with_all = ["target", "categorical"])]
    pub schema: Option<PathBuf>,
    #[arg(long, required_unless_present = "schema")]
    pub target: Option<String>,
    #[arg(long)]
    pub protected: Option<String>,
    /// Comma-separated categorical feature columns.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    /// Target value of the positive class.
    #[arg(long)]
    pub positive: Option<String>,
    /// Comma-separated measures to minimize, e.g. `mmce,f1_gap`.
    #[arg(long)]
    pub measures: String,
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Session seed; the AXMC_SEED environment variable takes precedence.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Initial design size (default max(8, 4 + 2k)).
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub weights: BoxArgs,
    /// Output directory for the snapshot, front and iteration log.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ContinueArgs {
    /// Session directory written by `run`.
    #[arg(long)]
    pub session: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[command(flatten)]
    pub weights: BoxArgs,
}

#[derive(Args, Debug)]
pub struct FrontArgs {
    #[arg(long)]
    pub session: PathBuf,
    #[arg(long, default_value = "valid", value_parser = ["valid", "test"])]
    pub split: String,
    #[arg(long, default_value = "text", value_parser = ["text", "csv", "json"])]
    pub format: String,
    /// Write to a file instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory holding one snapshot per session; restored on startup.
    #[arg(long, default_value = "axmc-sessions")]
    pub sessions: PathBuf,
    /// Built UI bundle to host at `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub rows: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// CSV path; the schema goes next to it with a `.schema.json` suffix.
    #[arg(long)]
    pub out: PathBuf,
}

/// A flag combination clap cannot express; reported as a usage error.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default = match cli.verbose {
        0 => "warn,axmc_core::measures=error",
        1 => "info,axmc_core::measures=error",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default)).init();

    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Continue(a) => commands::cont(a),
        Command::Front(a) => commands::front(a),
        Command::Serve(a) => commands::serve(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<UsageError>() {
            Some(u) => Cli::command()
                .error(clap::error::ErrorKind::ArgumentConflict, u)
                .exit(),
            None => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
