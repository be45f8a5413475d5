//! Command-line front end: `prepare`, `synth`, `train`, `evaluate`, `explain`.
//!
//! Every command writes `manifest.txt` into its output directory before doing
//! any heavy work. All randomness flows from `--seed` through named
//! sub-streams (split, init, sampling, dropout, kmeans, synth).

mod args;
mod commands;
mod manifest;

use anyhow::Result;

pub use args::{Cli, Command};
pub use manifest::{Manifest, MANIFEST_FILE};

/// Process exit codes, stable per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INVALID_INPUT: i32 = 4;
    pub const CONFIG: i32 = 5;
    pub const TRAINING: i32 = 6;
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => commands::prepare(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Explain(a) => commands::explain(&a),
    }
}

/// Maps an error chain to its documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use cakgcn_core::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } => exit::IO,
                E::Parse { .. } | E::Shape { .. } | E::UnknownId { .. } | E::InvalidArgument(_) => {
                    exit::INVALID_INPUT
                }
                E::Config(_) | E::TaskMismatch { .. } | E::Checkpoint(_) => exit::CONFIG,
                E::Training(_) | E::Undefined(_) => exit::TRAINING,
                E::MissingGradient(_) => exit::OTHER,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return exit::IO;
        }
        if cause.downcast_ref::<args::UsageError>().is_some() {
            return exit::USAGE;
        }
    }
    exit::OTHER
}
