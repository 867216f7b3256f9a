//! Command-line front end for filter synthesis, tomography and the readout
//! figures.

pub mod config;
pub mod error;
pub mod figures;
pub mod synthesize;
pub mod tomo;

use std::path::PathBuf;

use config::{Cli, Command, FileConfig, RunConfig};
use error::CliResult;

/// Resolves the configuration and runs one subcommand, returning written files.
pub fn run(cli: &Cli) -> CliResult<Vec<PathBuf>> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Fig1(a) | Command::Fig2(a) | Command::Fig3(a) => {
            let cfg = RunConfig::resolve(&a.common, a.snr.as_ref(), a.tune_threshold, None, false, &file)?;
            let path = match &cli.command {
                Command::Fig1(_) => figures::cmd_fig1(&cfg)?,
                Command::Fig2(_) => figures::cmd_fig2(&cfg)?,
                _ => figures::cmd_fig3(&cfg)?,
            };
            Ok(vec![path])
        }
        Command::Synthesize(a) | Command::Tomo(a) => {
            let cfg = RunConfig::resolve(&a.common, None, false, a.input.as_ref(), a.project, &file)?;
            match &cli.command {
                Command::Synthesize(_) => synthesize::cmd_synthesize(&cfg),
                _ => tomo::cmd_tomo(&cfg),
            }
        }
    }
}
