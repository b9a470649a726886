//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("radius is non-positive (min {min:.6e})")]
    NonPositiveRadius { min: f64 },

    #[error("time step rejected at tau={tau:.6}: min v {vmin:.6e} below floor {floor:.6e}")]
    StepRejected { tau: f64, vmin: f64, floor: f64 },

    #[error("graph condition violated: {0}")]
    GraphConditionViolated(String),

    #[error("tilted cylinder is not a graph on the requested ray (discriminant {disc:.6e})")]
    NotAGraph { disc: f64 },

    #[error("{what}: no convergence after {iters} iterations (residual {residual:.6e})")]
    NoConvergence {
        what: &'static str,
        iters: usize,
        residual: f64,
    },

    #[error("insufficient history: need {needed} samples, have {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("derivative order {order} exceeds available stencil order {max}")]
    StencilOrder { order: usize, max: usize },

    #[error("solver failed at tau={tau:.6}: {source}")]
    AtTime {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the rescaled time at which a failure occurred.
    pub fn at_tau(self, tau: f64) -> Error {
        Error::AtTime {
            tau,
            source: Box::new(self),
        }
    }
}
