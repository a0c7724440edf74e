//! File formats and command-line front end for `synthrf-core`.

pub mod chanfile;
pub mod commands;
pub mod config;
pub mod iq;

pub use synthrf_core as core;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use iq::{SampleFormat, WaveformKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or config: exit status 2.
    #[error("{0}")]
    Config(String),
    /// Anything failing while running: exit status 1.
    #[error("{0:#}")]
    Runtime(#[from] anyhow::Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "synthrf", version, about = "Synthetic satellite, HAPS and NR PRS waveforms through multipath channels")]
pub struct Cli {
    /// Seed overriding the config's seeds.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML config for the command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// I/Q sample format.
    #[arg(long, global = true, value_enum, default_value = "f32")]
    pub format: SampleFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a channel file from a channel spec.
    GenChannel,
    /// Render a waveform through a channel file into an I/Q file and sidecar.
    Synthesize {
        #[arg(value_enum)]
        kind: WaveformKind,
        #[arg(long)]
        channel: PathBuf,
    },
    /// Doppler spectrum of one source of a channel file, as CSV.
    Spectrum {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long, default_value_t = synthrf_core::channel::DEFAULT_SPECTRUM_NFFT)]
        nfft: usize,
    },
    /// Acquire PRNs in an I/Q file.
    Acquire {
        #[command(flatten)]
        rx: ReceiverArgs,
        /// Also write each correlation surface next to the output.
        #[arg(long)]
        surface: bool,
    },
    /// Acquire, then track, PRNs in an I/Q file.
    Track {
        #[command(flatten)]
        rx: ReceiverArgs,
    },
}

#[derive(Debug, Args)]
pub struct ReceiverArgs {
    #[arg(long)]
    pub iq: PathBuf,
    /// Comma-separated PRNs; defaults to those in the sidecar truth.
    #[arg(long, value_delimiter = ',')]
    pub prn: Vec<u8>,
    /// SNR gate in dB, overriding the config.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    commands::dispatch(cli)
}
