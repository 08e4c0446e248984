//! Library side of the `wfr` binary: input parsing, output files and the
//! subcommands themselves.

pub mod commands;
pub mod io;
pub mod manifest;

use std::path::PathBuf;

use thiserror::Error;
use wfr_core::analytic::AnalyticError;
use wfr_core::solver::SolverError;

/// Stated in every summary so the numbers are never read with the wrong factor.
pub const CONVENTION: &str = "distance^2 is the minimal action with a 1/2 prefactor: \
     int_0^1 int (|m|^2 + delta^2 zeta^2) / (2 rho) dx dt for wfr (kinetic part alone for w2, so w2 gives W2^2 / 2)";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {reason}")]
    Unreadable { path: PathBuf, reason: String },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid arguments: {0}")]
    Invalid(String),
    #[error(transparent)]
    Analytic(#[from] AnalyticError),
    #[error("solver aborted: {0}")]
    NonFinite(SolverError),
    #[error(transparent)]
    Solver(SolverError),
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::NonFiniteEnergy { .. } => CliError::NonFinite(e),
            SolverError::Grid(wfr_core::grids::GridError::ShapeMismatch { .. }) => CliError::Shape(e.to_string()),
            SolverError::Analytic(a) => CliError::Analytic(a),
            e => CliError::Solver(e),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Unreadable { .. } | CliError::Write { .. } => 1,
            CliError::Shape(_) | CliError::Invalid(_) | CliError::Analytic(_) | CliError::Solver(_) => 2,
            CliError::NonFinite(_) => 3,
        }
    }
}
