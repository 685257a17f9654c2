//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input contained NaN/inf or violated a basic shape requirement.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Matrix has an eigenvalue below the psd tolerance.
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    /// Numerical rank exceeds the requested factorization rank.
    #[error("numerical rank {rank} exceeds target rank {target}")]
    RankTooHigh { rank: usize, target: usize },

    /// The biquadratic has no pair of positive real roots.
    #[error("biquadratic has no positive real root pair")]
    NoRealRoots,

    /// Tetrahedron side data is inconsistent with any embedding.
    #[error("infeasible tetrahedron geometry: {0}")]
    InfeasibleGeometry(String),

    /// A second moment that cannot come from any point configuration.
    #[error("malformed second moment: {0}")]
    MalformedMoment(String),

    /// Pre-processing produced an empty candidate list.
    #[error("moment infeasible: empty ambiguity list for pair ({0}, {1})")]
    InfeasibleMoment(usize, usize),

    /// Norm profile does not match what the requested algorithm needs.
    #[error("norm profile mismatch: {detected} (expected {expected})")]
    ProfileMismatch { detected: String, expected: String },

    /// Assembly exhausted every candidate for some index tuple.
    #[error("assembly failed at tuple {tuple:?} ({remaining} pool values left)")]
    AssemblyFailed { tuple: Vec<usize>, remaining: usize },

    /// Rejection sampling could not reach a generic configuration.
    #[error("could not sample a generic configuration in {0} attempts")]
    DegenerateSampling(usize),

    /// Enumeration would exceed the combinatorial budget.
    #[error("rearrangement enumeration too large ({estimate} arrangements)")]
    TooLarge { estimate: u128 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A file whose contents do not parse as the expected format.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
