//! Exit-code classification: bad input exits 2, numerical trouble exits 1.

use std::fmt;

use supermarket::convergence::ConvergenceError;
use supermarket::distributions::DistributionError;
use supermarket::fixedpoint::{FixedPointError, ThetaError};
use supermarket::meanfield::MeanFieldError;
use supermarket::metrics::MetricsError;
use supermarket::numerics::OdeError;
use supermarket::phasetype::PhaseTypeError;
use supermarket::simulator::SimError;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) => 2,
            Self::Numerical(_) | Self::Io(_) => 1,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::Validation(message.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // One line, `kind: message`, so callers can split on the first colon.
        let (kind, message) = match self {
            Self::Validation(m) => ("validation", m),
            Self::Numerical(m) => ("numerical", m),
            Self::Io(m) => ("io", m),
        };
        write!(f, "{kind}: {}", message.replace('\n', " "))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<PhaseTypeError> for CliError {
    fn from(e: PhaseTypeError) -> Self {
        match e {
            PhaseTypeError::SingularSystem(_) | PhaseTypeError::NonConvergence(_) => Self::Numerical(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<DistributionError> for CliError {
    fn from(e: DistributionError) -> Self {
        match e {
            DistributionError::PhaseType(inner) => inner.into(),
            DistributionError::Quadrature(_) | DistributionError::ZeroSurvival { .. } => Self::Numerical(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<ThetaError> for CliError {
    fn from(e: ThetaError) -> Self {
        match e {
            ThetaError::Distribution(inner) => inner.into(),
            ThetaError::Quadrature(_) => Self::Numerical(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<FixedPointError> for CliError {
    fn from(e: FixedPointError) -> Self {
        match e {
            FixedPointError::Theta(inner) => inner.into(),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<OdeError> for CliError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::Instability { .. } => Self::Numerical(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<MeanFieldError> for CliError {
    fn from(e: MeanFieldError) -> Self {
        match e {
            MeanFieldError::Ode(inner) => inner.into(),
            MeanFieldError::OrderingViolated { .. } => Self::Numerical(e.to_string()),
            MeanFieldError::InvalidConfig(_) => Self::Validation(e.to_string()),
        }
    }
}

impl From<ConvergenceError> for CliError {
    fn from(e: ConvergenceError) -> Self {
        match e {
            ConvergenceError::InsufficientPoints { .. } | ConvergenceError::InvalidArgument(_) => {
                Self::Validation(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Distribution(inner) => inner.into(),
            MetricsError::FixedPoint(inner) => inner.into(),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Distribution(inner) => inner.into(),
            _ => Self::Validation(e.to_string()),
        }
    }
}
