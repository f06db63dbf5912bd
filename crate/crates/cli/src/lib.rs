//! Command-line driver for `dhym-core`: config loading, one function per
//! subcommand, and the acceptance suite.

pub mod commands;
pub mod config;
pub mod suite;

use std::path::Path;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] dhym_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
    /// The suite ran to completion but some criterion failed.
    #[error("{0} acceptance criteria failed")]
    Failed(usize),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything that went wrong while
    /// computing or writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    let p = dir.join(name);
    std::fs::write(&p, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}
