//! Library side of the `g2mix` command: scenario files, sweeps, figure
//! presets and their CSV/JSON outputs.

pub mod commands;
pub mod config;
pub mod output;
pub mod presets;

use thiserror::Error;

/// Output directory used when `--out` is not given.
pub const OUT_DIR_ENV: &str = "G2MIX_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error(transparent)]
    Runtime(#[from] g2mix::Error),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}
