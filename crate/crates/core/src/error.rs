use std::fmt;

use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("optical centers coincide (baseline norm {0:e})")]
    ZeroBaseline(f64),
    #[error("projection matrix A*R is singular (condition number {0:e})")]
    SingularProjection(f64),
    #[error("point coincides with the optical center")]
    AtOpticalCenter,
    #[error("image dimensions must be at least 2x2, got {width}x{height}")]
    BadDimensions { width: u32, height: u32 },
    #[error("y1 = {0} is at a pole of the distortion function")]
    PoleAtY(f64),
    #[error("image center is mapped to infinity")]
    DegenerateCenter,
    #[error("[C{0}]_22 vanishes; quartic coefficients undefined")]
    DegenerateC(u8),
    #[error("polynomial coefficients must be finite")]
    NonFiniteCoefficients,
    #[error("all polynomial coefficients are zero")]
    AllCoefficientsZero,
    #[error("no stationary point outside the pole-exclusion zones")]
    NoAdmissibleRoot,
    #[error("horizon ray is parallel to the baseline")]
    DegenerateZ,
    #[error("image midlines collapse under the perspective transform")]
    CollapsedMidlines,
    #[error("camera 1 optical axis is parallel to the baseline")]
    DegenerateOrientation,
    #[error("scan needs at least 1001 samples, got {0}")]
    TooFewSamples(usize),
    #[error("every scan sample falls inside a pole-exclusion zone")]
    EmptyDomain,
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("homography is singular")]
    SingularHomography,
    #[error("homography has a zero last element and cannot be normalised")]
    NonNormalisable,
}

/// Pipeline stage used to label errors coming out of [`crate::rectify::assemble`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Operands,
    Coefficients,
    Roots,
    Selection,
    Orientation,
    Shear,
    Fit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Operands => "operand matrices",
            Stage::Coefficients => "quartic coefficients",
            Stage::Roots => "quartic roots",
            Stage::Selection => "minimum selection",
            Stage::Orientation => "common orientation",
            Stage::Shear => "shear completion",
            Stage::Fit => "output fitting",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T> StageExt<T> for Result<T, Error> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|source| PipelineError { stage, source })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
