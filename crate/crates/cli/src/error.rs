use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Solver(#[from] rqbm_core::Error),

    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{failed} of {total} acceptance criteria failed")]
    Validation { failed: usize, total: usize },
}

impl CliError {
    /// 1 for anything fixable in the configuration, 2 for failures during a run.
    pub fn exit_code(&self) -> i32 {
        use rqbm_core::Error as E;
        match self {
            CliError::Config(_) => 1,
            // Rejected before the first step: bad parameters, a grid outside the
            // expansion's validity or a time step above the stability bound.
            CliError::Solver(
                E::Domain(_) | E::InvalidParameter { .. } | E::ExpansionInvalid { .. } | E::Unstable { .. },
            ) => 1,
            CliError::Solver(_) | CliError::Io { .. } | CliError::Validation { .. } => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
