use std::process::ExitCode;

use hea_dvae::data::DataError;
use hea_dvae::design::DesignError;
use hea_dvae::dvae::DvaeError;
use hea_dvae::elements::ElementError;
use hea_dvae::explain::ExplainError;
use hea_dvae::synth::SynthError;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Numeric(_) => 4,
        })
    }

    /// One JSON object on one line.
    pub fn line(&self) -> String {
        let (kind, message) = match self {
            Self::Usage(m) => ("usage", m),
            Self::Data(m) => ("data", m),
            Self::Numeric(m) => ("numeric", m),
        };
        serde_json::json!({ "error": kind, "message": message.replace('\n', " ") }).to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<ElementError> for CliError {
    fn from(e: ElementError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<DvaeError> for CliError {
    fn from(e: DvaeError) -> Self {
        match e {
            DvaeError::NonFiniteLoss(_) | DvaeError::Network(_) => Self::Numeric(e.to_string()),
            DvaeError::InvalidConfig(_)
            | DvaeError::PhaseOutOfRange(_)
            | DvaeError::LatentDimension { .. } => Self::Usage(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Model(inner) => inner.into(),
            DesignError::BadAxis(_)
            | DesignError::ZeroIterations
            | DesignError::NotTwoDimensional(_) => Self::Usage(e.to_string()),
            DesignError::Density(_) => Self::Numeric(e.to_string()),
            other => Self::Data(other.to_string()),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Model(inner) => inner.into(),
            ExplainError::Singular | ExplainError::NonFiniteModelOutput => {
                Self::Numeric(e.to_string())
            }
            other => Self::Data(other.to_string()),
        }
    }
}
