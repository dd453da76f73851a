//! Library behind the `fpt` binary: argument grammar, run configuration and
//! command implementations.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::fs::File;
use std::io::{self, BufWriter, Write};

pub use config::{Cli, Command, OracleKind, RunConfig, Sweep};
pub use error::CliError;

/// Runs a configuration, writing to `cfg.out` or standard output.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    match &cfg.out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            commands::execute(cfg, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            commands::execute(cfg, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}
