use thiserror::Error;

/// Errors raised by the samplers, the model builders and the experiment runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FptError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// The thinning intensity left `[0, kappa]` or evaluated to a non-finite value.
    #[error("assumption violated: intensity {value} at t={time}, x={state} outside [0, {kappa}]")]
    Assumption {
        time: f64,
        state: f64,
        value: f64,
        kappa: f64,
    },

    #[error("no acceptance after {proposals} proposals (empirical acceptance rate {acceptance_rate:.3e})")]
    NonTermination {
        proposals: u64,
        acceptance_rate: f64,
    },

    #[error("diffusion coefficient must be positive, got sigma({state}) = {value}")]
    DiffusionSign { state: f64, value: f64 },

    #[error("inversion failed: {0}")]
    Inversion(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sequencing error: {0}")]
    Sequencing(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl FptError {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            FptError::Parameter(_) => "parameter",
            FptError::Configuration(_) => "configuration",
            FptError::Unsupported(_) => "unsupported",
            FptError::Assumption { .. } => "assumption",
            FptError::NonTermination { .. } => "non_termination",
            FptError::DiffusionSign { .. } => "diffusion_sign",
            FptError::Inversion(_) => "inversion",
            FptError::Domain(_) => "domain",
            FptError::Sequencing(_) => "sequencing",
            FptError::Data(_) => "data",
            FptError::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for FptError {
    fn from(e: std::io::Error) -> Self {
        FptError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FptError>;
