use alloc::string::String;
use core::fmt;

use crate::locpoly::Side;

pub type Result<T> = core::result::Result<T, Error>;

/// Broad category of a failure. The CLI maps each class to an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input data, configuration or argument.
    Input,
    /// A point estimate could not be formed (singular design, weak first stage).
    Estimation,
    /// A covariance or quantile step failed.
    Inference,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid fit specification: {0}")]
    InvalidSpec(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample has no treatment column")]
    MissingTreatment,

    #[error("empty {0} side")]
    EmptySide(SideName),

    #[error("singular local design ({side} side, order {degree})")]
    SingularDesign { side: SideName, degree: usize },

    #[error("insufficient neighbors on the {side} side: need more than {needed} observations")]
    InsufficientNeighbors { side: SideName, needed: usize },

    #[error("weak first stage (level)")]
    WeakFirstStageLevel,

    #[error("weak first stage (derivative)")]
    WeakFirstStageDerivative,

    #[error("degenerate covariance")]
    DegenerateCovariance,
}

/// Display wrapper naming a side the way RD practitioners do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SideName(pub Side);

impl fmt::Display for SideName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Side::Left => f.write_str("control"),
            Side::Right => f.write_str("treated"),
        }
    }
}

impl Error {
    pub(crate) fn singular(side: Side, degree: usize) -> Self {
        Error::SingularDesign {
            side: SideName(side),
            degree,
        }
    }

    pub(crate) fn empty(side: Side) -> Self {
        Error::EmptySide(SideName(side))
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidSample(_) | Error::InvalidSpec(_) | Error::Domain(_) | Error::MissingTreatment => {
                ErrorClass::Input
            }
            Error::EmptySide(_)
            | Error::SingularDesign { .. }
            | Error::InsufficientNeighbors { .. }
            | Error::WeakFirstStageLevel
            | Error::WeakFirstStageDerivative => ErrorClass::Estimation,
            Error::DegenerateCovariance => ErrorClass::Inference,
        }
    }

    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidSample(_) => "invalid_sample",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Domain(_) => "domain",
            Error::MissingTreatment => "missing_treatment",
            Error::EmptySide(SideName(Side::Left)) => "empty_control_side",
            Error::EmptySide(SideName(Side::Right)) => "empty_treated_side",
            Error::SingularDesign { .. } => "singular_design",
            Error::InsufficientNeighbors { .. } => "insufficient_neighbors",
            Error::WeakFirstStageLevel => "weak_first_stage_level",
            Error::WeakFirstStageDerivative => "weak_first_stage_derivative",
            Error::DegenerateCovariance => "degenerate_covariance",
        }
    }
}
