//! The `regcx` pipeline: ingest → complexity → relatedness → spatial →
//! regress, each stage reading the previous stage's tidy CSV outputs from
//! the output directory.

pub mod commands;
pub mod config;
pub mod run;
mod tidy;

use std::fmt;
use std::path::Path;

use regcx::ErrorKind;

pub use config::{Config, Needs};

#[derive(Debug)]
pub enum CliError {
    /// Every problem found in the configuration.
    Config(Vec<String>),
    /// A library error with the stage context it occurred in.
    Core { context: String, source: regcx::Error },
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Core {
            context: "io".into(),
            source: regcx::Error::Io {
                path: path.to_path_buf(),
                source: e,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core { source, .. } => match source.kind() {
                ErrorKind::Data => 3,
                ErrorKind::Numerical => 4,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(errs) => {
                writeln!(
                    f,
                    "configuration invalid ({} problem{}):",
                    errs.len(),
                    if errs.len() == 1 { "" } else { "s" }
                )?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            CliError::Core { context, source } => write!(f, "{context}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Attaches stage context to library results.
pub(crate) trait Context<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for regcx::Result<T> {
    fn context(self, ctx: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|source| CliError::Core { context: ctx(), source })
    }
}
