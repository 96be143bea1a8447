use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{n} qubits exceeds the dense materialization limit of {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("invalid Pauli letter {0:?} (expected one of I, X, Y, Z)")]
    InvalidLetter(char),

    #[error("all-identity Pauli word has no support")]
    AllIdentity,

    #[error("matrix is not Hermitian (max deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("branch probability {prob:e} underflows the normalization guard")]
    Underflow { prob: f64 },

    #[error("all eigenvalues of the state fall below the floor {floor:e}")]
    AllLevelsBelowFloor { floor: f64 },

    #[error("need at least 4 levels after merging, found {found}")]
    TooFewLevels { found: usize },

    #[error("repeat-until-success exhausted {rounds} rounds without a directional outcome")]
    RoundsExhausted { rounds: usize },

    #[error("path replay mismatch: {0}")]
    ReplayMismatch(String),

    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }

    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Underflow { .. } | Error::AllLevelsBelowFloor { .. } => true,
            Error::Step { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
