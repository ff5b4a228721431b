use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice specification: {0}")]
    InvalidSpec(String),

    #[error("particle number exceeds lattice capacity: {particles} particles, capacity {capacity}")]
    Capacity { particles: usize, capacity: usize },

    #[error("operands are defined on different bases")]
    BasisMismatch,

    #[error("channel {channel} is not available for {statistics}")]
    ChannelMismatch {
        channel: &'static str,
        statistics: &'static str,
    },

    #[error("site index {site} out of range for a lattice of {sites} sites")]
    SiteOutOfRange { site: usize, sites: usize },

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("measurement inconsistent with state: {0}")]
    InconsistentMeasurement(String),

    #[error("invalid detection-rate regime: m/t = {rate}, threshold {threshold}")]
    InvalidRegime { rate: f64, threshold: f64 },

    #[error("distribution is not normalized (total {total})")]
    Unnormalized { total: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by the physics or numerics rather than malformed input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoConvergence { .. }
                | Error::InconsistentMeasurement(_)
                | Error::InvalidRegime { .. }
                | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
