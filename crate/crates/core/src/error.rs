use thiserror::Error;

/// Errors raised by grid construction, assembly, the linear solvers and the drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-positive permeability {value} at entry {index}")]
    NonPositivePermeability { index: usize, value: f64 },

    #[error("unparsable token `{token}` at position {position}")]
    Unparsable { token: String, position: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("matrix is numerically singular at pivot {pivot}")]
    Singular { pivot: usize },

    #[error("incompatible Neumann data: net imbalance {imbalance:e} exceeds {tolerance:e}")]
    Incompatible { imbalance: f64, tolerance: f64 },

    #[error("saturation {value} left [0, 1] in cell {cell}; time step violates the CFL bound")]
    CflViolation { cell: usize, value: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("missing basis-function set for subdomain {0}")]
    MissingMbf(usize),

    #[error("problem too large for a direct fine solve: {unknowns} unknowns exceed cap {cap}")]
    TooLarge { unknowns: usize, cap: usize },

    /// Darcy solve failure inside the time loop, with the saturation at that point.
    #[error("two-phase run aborted at pressure step {step} (T_PVI {t_pvi:.6}): {source}")]
    Aborted {
        step: usize,
        t_pvi: f64,
        saturation: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
