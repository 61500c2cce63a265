//! `sociallab` command-line driver.

mod commands;
mod run_dir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sociallab::Error;

#[derive(Parser, Debug)]
#[command(name = "sociallab", version, about = "Social learning on NK landscapes")]
struct Cli {
    /// Worker threads for data-parallel stages; 1 forces sequential execution.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// TOML config file, merged over the presets.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset; repeat to stack, later presets win.
    #[arg(long = "preset")]
    pub presets: Vec<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory. Must be absent or empty.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Landscape utilities.
    Landscape {
        #[command(subcommand)]
        command: LandscapeCommand,
    },
    /// Run every configured baseline strategy and rank them.
    Baselines(Common),
    /// Train a policy.
    Train(Common),
    /// Evaluate a saved policy as a strategy.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Export strategy diagrams for a saved policy or a scripted oracle.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
        checkpoint: Option<PathBuf>,
        /// copy-best, uniform, keep-self, bi-analytic or bi-sampled
        #[arg(long)]
        oracle: Option<String>,
        /// Own payoff held fixed in the diagrams.
        #[arg(long)]
        p0: Option<u32>,
        /// Grid stride of the voxel diagram.
        #[arg(long)]
        stride: Option<u32>,
    },
    /// Summarize finished run directories into a markdown report.
    Report {
        #[arg(long)]
        out: PathBuf,
        /// Run directories to include.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum LandscapeCommand {
    /// Generate one landscape and save it as JSON.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// exclusive or inclusive
        #[arg(long)]
        interaction: Option<String>,
        /// Batch slot to reproduce.
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidParameter(_)
        | Error::Version { .. }
        | Error::DimensionMismatch { .. }
        | Error::Parse { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = (|| {
        if let Some(n) = cli.workers {
            sociallab::exec::set_workers(n)?;
        }
        let ctx = commands::Context {
            workers: cli.workers,
            argv,
        };
        match cli.command {
            Command::Landscape {
                command:
                    LandscapeCommand::Gen {
                        common,
                        n,
                        k,
                        interaction,
                        index,
                    },
            } => commands::landscape_gen(&ctx, &common, n, k, interaction.as_deref(), index),
            Command::Baselines(common) => commands::baselines(&ctx, &common),
            Command::Train(common) => commands::train(&ctx, &common),
            Command::Eval { common, checkpoint } => commands::eval(&ctx, &common, &checkpoint),
            Command::Probe {
                common,
                checkpoint,
                oracle,
                p0,
                stride,
            } => commands::probe(&ctx, &common, checkpoint.as_deref(), oracle.as_deref(), p0, stride),
            Command::Report { out, runs } => commands::report(&ctx, &out, &runs),
        }
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
