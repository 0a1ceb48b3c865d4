use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty matrix ({rows}x{cols})")]
    EmptyMatrix { rows: usize, cols: usize },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge")]
    NoConvergence,

    #[error(
        "infeasible angle: cos(theta) + lambda*l/(n*d) = {argument:.6} lies outside [-1, 1]; \
         try a smaller |l| step or a wider element spacing"
    )]
    InfeasibleAngle { argument: f64 },

    #[error("degenerate angular offset: l = {l} is a multiple of the array size {elements}")]
    DegenerateOffset { l: i64, elements: usize },

    #[error(
        "infeasible angle chain for {side} side ({elements} elements): only {found} of {needed} \
         mutually orthogonal directions fit; use smaller |l| steps, fewer sites or more elements"
    )]
    InfeasibleChain {
        side: &'static str,
        elements: usize,
        needed: usize,
        found: usize,
    },

    #[error("channel is identically zero; no transmit direction exists")]
    ZeroChannel,

    #[error("effective stream matrix is rank deficient: rank {achieved} < {required} streams")]
    RankDeficient { achieved: usize, required: usize },

    #[error("null space is empty: {streams} streams do not fit in {antennas} transmit antennas")]
    EmptyNullSpace { streams: usize, antennas: usize },

    #[error("noise covariance is singular")]
    SingularCovariance,

    #[error("covariance is not Hermitian (asymmetry {asymmetry:.3e})")]
    NonHermitian { asymmetry: f64 },

    #[error("amplification undefined: incident power and RIS noise are both zero")]
    UndefinedAmplification,

    #[error("config error: {0}")]
    Config(String),

    #[error("sweep axes differ: {left} vs {right}")]
    SweepMismatch { left: String, right: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) | Error::SweepMismatch { .. } => ErrorKind::Config,
            Error::Io { .. } | Error::Csv(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }

    pub(crate) fn dim(context: impl Into<String>, expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
