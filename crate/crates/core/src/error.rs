use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },
    #[error("partial trace needs at least one kept mode")]
    EmptyKeepSet,
    #[error("cannot tensor states with operators")]
    MixedKinds,
    #[error("operator is not block diagonal in total photon number (leak {leak:e})")]
    NotNumberConserving { leak: f64 },
    #[error("truncation tail population {tail:e} exceeds tolerance {tolerance:e}")]
    TruncationTail { tail: f64, tolerance: f64 },
    #[error("outcome has zero probability")]
    ZeroProbability,
    #[error("no sign change of the balance function in R = [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("no real squeezing realises this target: |e^(i phi) tanh R| = {0} >= 1")]
    Unreachable(f64),
    #[error("density operator is not positive semidefinite (eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("Wigner grid misses probability mass: integral {0}")]
    GridCoverage(f64),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
