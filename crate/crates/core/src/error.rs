use thiserror::Error;

pub type Result<T> = std::result::Result<T, CcaError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CcaError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at channel {channel}, sample {sample}")]
    NonFinite { channel: usize, sample: usize },

    #[error("insufficient samples: need at least {required}, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    /// The sample covariance is (numerically) rank deficient.
    #[error("degenerate input: covariance eigenvalue {eigenvalue:e} is below {threshold:e}")]
    DegenerateInput { eigenvalue: f64, threshold: f64 },

    #[error("FastICA did not converge after {iterations} iterations (last delta {last_delta:e})")]
    NonConvergence { iterations: usize, last_delta: f64 },

    #[error("near-degenerate dependence: normal-score correlation determinant {determinant:e}")]
    NearDegenerateDependence { determinant: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// The data cannot be represented by the requested copula family.
    #[error("family domain: {0}")]
    FamilyDomain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A per-block failure inside the two-phase fit; blocks are 1-indexed.
    #[error("block {block:?}: {source}")]
    Block {
        block: Vec<usize>,
        #[source]
        source: Box<CcaError>,
    },
}
