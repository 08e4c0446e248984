use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wfr_core::action::ModelKind;
use wfr_core::grids::GridSpec;

/// Solver knobs as given on the command line (`gamma: None` means automatic).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub gamma: Option<f64>,
    pub alpha: f64,
    pub max_iters: usize,
    pub tol: f64,
}

/// Everything needed to rerun a solve. Written verbatim into `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model: ModelKind,
    pub delta: f64,
    pub grid: GridSpec,
    pub solver: SolverSettings,
    pub rho0: PathBuf,
    pub rho1: PathBuf,
    pub out_dir: PathBuf,
    /// The solver is deterministic; kept so runs driven by random inputs can
    /// record where those came from.
    pub seed: u64,
}
