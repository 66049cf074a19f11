use std::path::PathBuf;

use floquet_lattice::{ExperimentError, FloquetError, HfeError, IntegrationError, LatticeError, ScenarioError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Floquet(#[from] FloquetError),
    #[error(transparent)]
    Hfe(#[from] HfeError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("output directory {0} is not empty; pass --force to overwrite")]
    Collision(PathBuf),
    #[error("no output directory: pass --out or set output.dir")]
    NoOutput,
    #[error("convergence check failed: {0}")]
    Check(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}
