mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use siegel_green::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] CoreError),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("verification failed")]
    VerifyFailed,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::NoConvergence { .. } => 3,
                CoreError::InvalidParameter(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::NonSymmetric { .. }
                | CoreError::OutsideBand { .. }
                | CoreError::SizeCap { .. }
                | CoreError::GapViolation { .. } => 2,
                _ => 4,
            },
            CliError::Io(_) => 4,
            CliError::VerifyFailed => 5,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "siegel-green", version, about = "Green's functions of random matrix Schrödinger operators on the line")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set experiment.trials=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    /// Worker threads; 0 or unset uses every available core.
    #[arg(long, short, env = "SIEGEL_GREEN_JOBS", global = true)]
    jobs: Option<usize>,

    /// Print the effective configuration with every default filled in, then exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Band geometry of the free operator: I_D, sigma and mode counts.
    Bands,
    /// Diagonal or half-line Green's blocks at the configured sites.
    Green,
    /// Local density of states on a grid of energies.
    Dos,
    /// Monte Carlo estimate of E[cd²] over disorder realizations.
    Mc,
    /// Sampled property suites.
    Verify {
        /// siegel, lemma25, appendixB, oracle, blockdecomp or all.
        suite: String,
        #[arg(default_value_t = 1000)]
        samples: usize,
        #[arg(default_value_t = 0)]
        seed: u64,
        /// Fixed symmetric perturbation for the lemma25 suite, as JSON rows.
        #[arg(long)]
        delta: Option<String>,
    },
    /// Block decomposition residual table as JSON.
    Blockdemo,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (text, origin) = match &cli.config {
        Some(p) => (
            std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (String::new(), "<defaults>".to_string()),
    };
    let cfg = config::load(&text, &origin, &cli.set)?;
    if cli.print_config {
        print!("{}", config::to_toml(&cfg));
        return Ok(());
    }
    let Some(command) = cli.command else {
        return Err(CliError::Config("no subcommand given (see --help)".into()));
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    pool.install(|| match command {
        Command::Bands => commands::bands(&cfg),
        Command::Green => commands::green(&cfg),
        Command::Dos => commands::dos(&cfg),
        Command::Mc => commands::mc(&cfg),
        Command::Verify { suite, samples, seed, delta } => commands::verify(&cfg, &suite, samples, seed, delta.as_deref()),
        Command::Blockdemo => commands::blockdemo(&cfg),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::VerifyFailed) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
