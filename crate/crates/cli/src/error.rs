use btfem::error::Error as CoreError;
use btfem::oracle::OracleError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("mesh error: {0}")]
    Mesh(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 configuration, 3 mesh or parse, 4 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 2,
            CliError::Mesh(_) => 3,
            CliError::Solver(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Mesh(_) | CoreError::Parse(_) | CoreError::Periodic(_) => CliError::Mesh(msg),
            CoreError::Solver(_) | CoreError::NonFinite { .. } => CliError::Solver(msg),
            CoreError::Oracle(o) => o.into(),
            CoreError::Sequence(_) | CoreError::Assembly(_) | CoreError::Config(_) => CliError::Config(msg),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Unstable { .. } => CliError::Solver(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}
