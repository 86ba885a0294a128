//! `ocular` command line: experiments, codec tooling and the live server.

mod codec;
mod plot;
mod run;
pub mod serve;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{ConfigError, Experiment};
use crate::sim::SimError;

pub use codec::{cmd_codec, format_hex, parse_hex, CodecArgs, CodecCommand, InstrArg};
pub use plot::trace_svg;
pub use run::{cmd_run, RunOptions, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
/// Bad arguments, configuration or input data.
pub const EXIT_USAGE: i32 = 2;
/// Output could not be written.
pub const EXIT_OUTPUT: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Output { .. } => EXIT_OUTPUT,
            CliError::Sim(_) | CliError::Io(_) => EXIT_FAILURE,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ocular", version, about = "Binocular tendon-driven eye: simulator and servo tooling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one experiment and write its trace, metrics and optional plot.
    Run(RunArgs),
    /// Encode or decode Dynamixel 2.0 frames.
    Codec(CodecArgs),
    /// Run the live simulation and stream state over WebSocket.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub experiment: Experiment,
    /// TOML config; falls back to $OCULAR_CONFIG, then built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Baseline run with the vestibular feedforward switched off.
    #[arg(long)]
    pub vor_disabled: bool,
    /// Also write `<experiment>_plot.svg`.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory of built UI assets served at `/`.
    #[arg(long, default_value = "ui/dist")]
    pub ui_dir: PathBuf,
}

/// Parse `args` (including the program name) and execute. Returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&RunOptions::from(a)).map(|out| {
            for p in out.files() {
                println!("{}", p.display());
            }
        }),
        Command::Codec(a) => cmd_codec(&a, &mut std::io::stdout()),
        Command::Serve(a) => serve::cmd_serve(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
