//! Command-line front end: plans, runs and verifies from a config file.

mod commands;
mod config;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{CmdError, Context};
use config::Config;

#[derive(Parser)]
#[command(
    name = "proxsampler",
    version,
    about = "Proximal sampler runs and checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Root seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the step size and step count and write plan.csv.
    Plan(Common),
    /// Run one chain and write trace.csv and summary.csv.
    Sample(Common),
    /// Check the oracle against its exact conditional; writes rgo_report.csv.
    VerifyRgo(Common),
    /// Check the concentration bound against sampled tails; writes tail_report.csv.
    VerifyConc(Common),
    /// Compare against ULA and MALA at matched gradient budgets; writes baselines.csv.
    Benchmark(Common),
}

type Handler = fn(&Context) -> Result<bool, CmdError>;

fn run(cli: Cli) -> Result<bool, CmdError> {
    let (common, f): (&Common, Handler) = match &cli.command {
        Command::Plan(c) => (c, commands::plan),
        Command::Sample(c) => (c, commands::sample),
        Command::VerifyRgo(c) => (c, commands::verify_rgo),
        Command::VerifyConc(c) => (c, commands::verify_conc),
        Command::Benchmark(c) => (c, commands::benchmark),
    };
    let text = std::fs::read_to_string(&common.config).map_err(|e| {
        CmdError::Config(config::ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", common.config.display()),
        })
    })?;
    let cfg = Config::parse(&text)?;
    let seed = match common.seed {
        Some(s) => s,
        None => cfg.get_or("", "seed", 0)?,
    };
    let out = commands::output_dir(&cfg, common.out.clone())?;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(CmdError::Config(config::ConfigError {
                line: None,
                message: "--jobs must be at least 1".into(),
            }));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("thread pool is configured once");
    }
    f(&Context { cfg, seed, out })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
