//! `eal`: run classification, average, limit, invariance, occupancy and
//! sweep experiments from a TOML or JSON config.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use run::{Context, Failure};

#[derive(Parser)]
#[command(name = "eal", version = output::VERSION, about = "Multiple ergodic averages along floor iterates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Function-class verdicts, for one `--function` (JSON to stdout) or a config's `functions`.
    Classify(ClassifyArgs),
    /// Traces of the multiple average at each checkpoint.
    Average(RunArgs),
    /// Closed-form limit against the empirical average at the last checkpoint.
    Limit(RunArgs),
    /// Invariance defect of the empirical measure.
    Invariance(RunArgs),
    /// Occupancy counts of the iterate boxes and the three-term magnitudes.
    Occupancy(RunArgs),
    /// Grid over exponents or over (gamma, ell).
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long, required_unless_present = "function", conflicts_with = "function")]
    config: Option<PathBuf>,
    /// Function in the DSL, e.g. "x^(1/3)*log(x)".
    #[arg(long)]
    function: Option<String>,
    /// Comma-separated list from SL,F,T,S,R,Dk,Mk (k = 0, 1, 2).
    #[arg(long)]
    classes: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
}

fn with_config(args: &RunArgs, body: fn(&Context) -> Result<(), Failure>) -> Result<(), Failure> {
    let config = RunConfig::load(&args.config)?;
    let workers = args.workers.or(config.workers).unwrap_or(1).max(1);
    body(&Context {
        config: &config,
        out: &args.out,
        workers,
    })
}

fn classify(args: &ClassifyArgs) -> Result<(), Failure> {
    if let Some(text) = &args.function {
        let classes = run::parse_classes(args.classes.as_deref())?;
        let verdicts = run::classify_one(text, &classes)?;
        let json = serde_json::to_string_pretty(&verdicts).map_err(|e| Failure::Io(e.to_string()))?;
        println!("{json}");
        return Ok(());
    }
    let path = args.config.as_ref().expect("clap requires --config or --function");
    let mut config = RunConfig::load(path)?;
    if args.classes.is_some() {
        config.classes = args.classes.clone();
    }
    run::classify_config(&Context {
        config: &config,
        out: &args.out,
        workers: args.workers.unwrap_or(1),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Classify(a) => classify(a),
        Command::Average(a) => with_config(a, run::average),
        Command::Limit(a) => with_config(a, run::limit),
        Command::Invariance(a) => with_config(a, run::invariance),
        Command::Occupancy(a) => with_config(a, run::occupancy_table),
        Command::Sweep(a) => with_config(a, run::sweep),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("eal: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
