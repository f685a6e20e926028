//! Experiment runner around `annulus-core`: run configurations, the
//! `solve`/`sweep`/`verify`/`diagnose` commands and their output files.

use std::fmt;

pub mod config;
pub mod fields_io;
pub mod run;
pub mod verify;

pub use config::{Prepared, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input: configuration, field files, output location.
    Config(String),
    /// The numerics failed outright (not mere non-convergence).
    Solver(annulus_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Solver(_) => EXIT_NOT_CONVERGED,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Solver(e) => write!(f, "solver error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<annulus_core::Error> for CliError {
    fn from(e: annulus_core::Error) -> Self {
        use annulus_core::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::Inadmissible { .. }
            | E::InvalidBoundary(_)
            | E::UnresolvedTrace { .. }
            | E::InvalidProfile(_)
            | E::SpiralResonance
            | E::InvalidConfig(_)
            | E::GridMismatch => Self::Config(e.to_string()),
            other => Self::Solver(other),
        }
    }
}

pub(crate) fn io_error(path: &std::path::Path, e: impl fmt::Display) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}
