use thiserror::Error;

/// Errors produced by sampling, fitting, testing, and calibration routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or procedure parameter is outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A sample value is outside the domain required by an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The sample carries no information for the requested fit.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// A statistic spec cannot be evaluated on a sample of this size.
    #[error("statistic spec not valid for n = {n}: {reason}")]
    SpecMismatch { n: usize, reason: String },

    /// All values entering a statistic denominator are zero.
    #[error("degenerate denominator: trimmed sum is zero")]
    DegenerateDenominator,

    /// A piecewise fit was asked for a layer that contains no points.
    #[error("empty layer: {0}")]
    EmptyLayer(String),

    /// The alternative model scored below the null after optimization.
    #[error("optimization failure: {0}")]
    OptimizationFailure(String),

    /// An iterative root-find did not converge.
    #[error("root-find did not converge after {iterations} iterations, bracket [{lo}, {hi}]")]
    NonConvergence { iterations: usize, lo: f64, hi: f64 },

    /// The sample is too small for the requested procedure.
    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    /// A Monte-Carlo table is too small to resolve the requested level.
    #[error("table of {replicates} replicates cannot resolve level {level}")]
    Resolution { level: f64, replicates: usize },

    /// Marginal-level bisection exhausted its bracket before reaching tolerance.
    #[error("calibration stopped at b = {best_b} with achieved level {achieved} (target {target})")]
    CalibrationTolerance {
        best_b: f64,
        achieved: f64,
        target: f64,
    },

    /// A computation produced a non-finite value.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A cache file is malformed or does not match its key.
    #[error("cache error: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
