mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use commands::{Scale, SweepArgs, SweepParam};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "collapse-lab",
    version,
    about = "Collapse rates and catness distances for the DP and CSL models"
)]
struct Cli {
    /// Scenario file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides mc.seed; also seeds `verify` and `demo-conservation`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, env = "COLLAPSE_LAB_THREADS")]
    threads: Option<usize>,
    /// Write the table here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Catness, lifetime and rate for each displacement.
    Rate {
        /// Single displacement replacing the configured list, e.g. "1e-14 m".
        #[arg(long)]
        dx: Option<String>,
    },
    /// One table row per swept value.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long)]
        from: Option<String>,
        #[arg(long)]
        to: Option<String>,
        #[arg(long, default_value_t = 10)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Scale::Linear)]
        scale: Scale,
    },
    /// DP and CSL side by side.
    Compare,
    /// Run a self-check suite: oracles, invariants, paper-numbers or all.
    Verify { suite: String },
    /// Repeated which-branch measurements of a two-branch cat.
    DemoConservation {
        #[arg(long)]
        separation: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value = "0.5,0.5")]
        weights: String,
    },
}

fn scenario(cli: &Cli) -> CliResult<config::Scenario> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --config".into()))?;
    config::load(path)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Rate { dx } => commands::rate(&scenario(&cli)?, dx.as_deref(), out),
        Command::Sweep {
            param,
            from,
            to,
            points,
            scale,
        } => {
            let args = SweepArgs {
                param: *param,
                from: from.as_deref(),
                to: to.as_deref(),
                points: *points,
                scale: *scale,
            };
            commands::sweep(&scenario(&cli)?, &args, cli.seed, out)
        }
        Command::Compare => commands::compare(&scenario(&cli)?, out),
        Command::Verify { suite } => {
            let consts = match &cli.config {
                Some(_) => scenario(&cli)?.constants,
                None => collapse_core::PhysicalConstants::default(),
            };
            commands::verify(suite, &consts, cli.seed.unwrap_or(1), out)
        }
        Command::DemoConservation {
            separation,
            trials,
            weights,
        } => commands::demo(separation, weights, *trials, cli.seed.unwrap_or(0), out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("collapse-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
