//! Command implementations behind the `taskfree` binary. Each `cmd_*`
//! function takes a fully merged [`RunConfig`] and returns the text to print.

pub mod commands;
pub mod config;

use std::path::PathBuf;

use taskfree_core::{Error, ErrorKind};

pub use commands::{cmd_eval, cmd_gen_stream, cmd_ingest, cmd_inspect, cmd_report, cmd_run};
pub use config::{DatasetSource, RunConfig};

/// A pipeline error tagged with the config file it came from.
#[derive(Debug, thiserror::Error)]
#[error("{}{source}", .config.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
pub struct CliError {
    pub config: Option<PathBuf>,
    #[source]
    pub source: Error,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self.source.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numeric => 4,
        }
    }
}
