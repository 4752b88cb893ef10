use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid site list {sites:?} for a {n_qubits}-qubit register")]
    InvalidSites { sites: Vec<usize>, n_qubits: usize },

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("state is not normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("chain must contain at least one qubit")]
    EmptyChain,

    #[error("register of {n_qubits} qubits exceeds the dense limit of {limit}")]
    TooLarge { n_qubits: usize, limit: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Kraus arity {arity} does not match {sites} target site(s)")]
    ArityMismatch { arity: usize, sites: usize },

    #[error("time grids differ between ensemble members")]
    GridMismatch,

    #[error("noisy evolution requires an evolution plan")]
    MissingPlan,

    #[error("process matrix is unphysical (min eigenvalue {min_eigenvalue:.3e})")]
    Unphysical { min_eigenvalue: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
