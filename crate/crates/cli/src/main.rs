//! `bpsm` command-line tool: simulation studies and CSV analyses with
//! standard and Bayesian propensity score matching.

mod commands;
mod config;
mod input;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    /// Bad input data or configuration (exit 2).
    Input(String),
    /// A statistical step failed at run time (exit 3).
    Runtime(String),
    /// Writing output failed (exit 1).
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Runtime(m) => write!(f, "statistical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bpsm",
    about = "Standard and Bayesian propensity score matching",
    version
)]
struct Cli {
    /// Worker threads for replications and bootstrap (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Master seed. Overrides `UN_SEED`, which overrides the config file.
    #[arg(long, env = "UN_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo study comparing PSM and BPSM.
    Simulate {
        /// JSON config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (created if missing).
        #[arg(long, default_value = "bpsm-out")]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Analyze a CSV dataset (columns id,z,y,covariates...) with PSM and BPSM.
    Analyze {
        /// Input CSV.
        #[arg(long)]
        data: PathBuf,
        /// JSON config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "bpsm-out")]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Check a config file and report every problem.
    ValidateConfig { config: PathBuf },
    /// Print the version.
    Version,
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let mut run = config::load(&config)?;
            if let Some(s) = seed.seed {
                run.sim.seed = s;
            }
            prepare_out(&out)?;
            commands::simulate(&run.sim, &out)
        }
        Command::Analyze {
            data,
            config,
            out,
            seed,
        } => {
            let mut run = match config {
                Some(path) => config::load(&path)?,
                None => config::defaults(),
            };
            if let Some(s) = seed.seed {
                run.sim.seed = s;
            }
            let dataset = input::read_dataset(&data)?;
            prepare_out(&out)?;
            commands::analyze(&dataset, &run, &out)
        }
        Command::ValidateConfig { config } => {
            config::load(&config)?;
            println!("OK");
            Ok(())
        }
        Command::Version => {
            println!("bpsm {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
