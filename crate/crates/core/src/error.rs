use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),

    #[error("infeasible problem: source mass {source_mass} != target mass {target_mass}")]
    Infeasible { source_mass: f64, target_mass: f64 },

    #[error("no discrete path: target support is not reachable from the source in {slices} time slices")]
    Unreachable { slices: usize },

    #[error("cubic x^3 + {a2}x^2 + {a1}x + {a0} has no nonnegative real root")]
    NoNonnegativeRoot { a2: f64, a1: f64, a0: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed field file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
