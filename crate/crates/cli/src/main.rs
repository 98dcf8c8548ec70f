//! `qcra`: build codes, encode/decode files, run WER and efficiency
//! simulations, and compute CV-QKD key-rate curves.
//!
//! Exit status: 0 on success, 2 for configuration or input errors, 3 when a
//! threshold cannot be bracketed or no scheme is feasible, 1 for I/O
//! failures.

mod bitio;
mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Overrides;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<qcra::Error> for CliError {
    fn from(e: qcra::Error) -> Self {
        match e {
            qcra::Error::Infeasible(_) | qcra::Error::Range(_) => CliError::Infeasible(e.to_string()),
            qcra::Error::Io(m) => CliError::Io(std::io::Error::other(m)),
            qcra::Error::Length { .. } => CliError::Input(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qcra", version, about = "QC-RA codes for CV-QKD reconciliation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate a code table and print its structure; `--out` writes
    /// the expanded parity-check matrix as JSON.
    BuildCode,
    /// Encode a packed message file (random message when `--input` is absent).
    Encode {
        #[arg(long)]
        input: Option<std::path::PathBuf>,
    },
    /// Send a packed codeword over the AWGN channel and write channel LLRs.
    Transmit {
        #[arg(long)]
        input: std::path::PathBuf,
    },
    /// Decode an LLR file into a packed codeword estimate.
    Decode {
        #[arg(long)]
        input: std::path::PathBuf,
    },
    /// WER at fixed SNR points, or the SNR reaching `--wer-target`.
    Simulate,
    /// Efficiency at several WER targets and the hop/repeat versus
    /// puncture/extend comparison.
    Sweep,
    /// Secret key rate against distance for configured code profiles.
    Keyrate,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildCode => commands::build_code(&cli.overrides),
        Command::Encode { input } => commands::encode(&cli.overrides, input.as_deref()),
        Command::Transmit { input } => commands::transmit(&cli.overrides, input),
        Command::Decode { input } => commands::decode(&cli.overrides, input),
        Command::Simulate => commands::simulate(&cli.overrides),
        Command::Sweep => commands::sweep(&cli.overrides),
        Command::Keyrate => commands::keyrate(&cli.overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qcra: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
