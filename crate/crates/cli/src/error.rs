use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("bad override `{spec}`: {reason}")]
    Override { spec: String, reason: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] molcav::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for numerical non-convergence, 1 for everything the user can fix
    /// in the config.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Model(e) => model_code(e),
            _ => 1,
        }
    }
}

fn model_code(e: &molcav::Error) -> u8 {
    match e {
        molcav::Error::Step { source, .. } => model_code(source),
        molcav::Error::StepControl { .. }
        | molcav::Error::Quadrature { .. }
        | molcav::Error::Leakage { .. } => 2,
        _ => 1,
    }
}
