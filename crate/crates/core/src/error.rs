use thiserror::Error;

use crate::linalg::Vec2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid electrode configuration: {0}")]
    InvalidElectrodes(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("nearest boundary point of ({}, {}) is not unique", .0.x, .0.y)]
    AmbiguousProjection(Vec2),

    #[error("conductivity at ({}, {}) has eigenvalues [{min}, {max}] outside [1/c0, c0] with c0 = {bound}", .at.x, .at.y)]
    EllipticityViolation { at: Vec2, min: f64, max: f64, bound: f64 },

    #[error("cannot factor 2*kappa at ({}, {})", .0.x, .0.y)]
    FactorizationFailure(Vec2),

    #[error("unsupported conductivity field: {0}")]
    UnsupportedField(String),

    #[error("reflected point ({}, {}) still outside the domain after two corrections; reduce dt", .0.x, .0.y)]
    StuckAtCorner(Vec2),

    #[error("path reached the time horizon {0} before leaving the domain")]
    HorizonExceeded(f64),

    #[error("calibrated local-time constant {fitted} deviates from the analytic value {analytic} by more than 20%")]
    CalibrationDiverged { fitted: f64, analytic: f64 },

    #[error("boundary data violates compatibility: integral {integral} exceeds tolerance {tolerance}")]
    CompatibilityViolation { integral: f64, tolerance: f64 },

    #[error("the continuum representation requires an identity collar at the boundary")]
    MissingCollar,

    #[error("local time {requested} not reached; path ended at local time {reached}")]
    LocalTimeExhausted { requested: f64, reached: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("linear solver did not converge: relative residual {residual} after {iterations} iterations")]
    SolverDiverged { residual: f64, iterations: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
