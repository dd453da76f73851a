use fpt_core::FptError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    BadInput(String),
    #[error(transparent)]
    Numeric(FptError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl From<FptError> for CliError {
    fn from(e: FptError) -> Self {
        match e {
            FptError::InvalidParameter(m) => CliError::BadInput(m),
            FptError::UnknownModel(_) | FptError::FieldSpec(_) | FptError::OutOfRange(..) => {
                CliError::BadInput(e.to_string())
            }
            other => CliError::Numeric(other),
        }
    }
}

impl CliError {
    /// 2 for numerical failures, 3 for bad input or unusable paths.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numeric(_) => 2,
            CliError::BadInput(_) | CliError::Io(_) | CliError::Csv(_) => 3,
        }
    }
}
