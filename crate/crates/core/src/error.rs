use thiserror::Error;

use crate::drive::DriveError;
use crate::modulator::ModulatorError;
use crate::polarization::PolarizationError;
use crate::quadrature::QuadratureError;
use crate::skr::SkrError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A physical parameter outside its allowed range.
///
/// `field` is the dotted key as it appears in a run configuration, relative
/// to the owning struct (e.g. `fwhm_t0`); callers prefix the section name.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid `{field}`: {constraint}")]
pub struct ParamError {
    pub field: String,
    pub constraint: String,
}

impl ParamError {
    pub fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        ParamError {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    /// Prepends a section name to the field path.
    pub fn within(mut self, section: &str) -> Self {
        self.field = format!("{section}.{}", self.field);
        self
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Polarization(#[from] PolarizationError),
    #[error(transparent)]
    Modulator(#[from] ModulatorError),
    #[error(transparent)]
    Drive(#[from] DriveError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    Skr(#[from] SkrError),
}
