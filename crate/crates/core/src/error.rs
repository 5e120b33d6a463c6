use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpineError {
    #[error("unsupported field Q(sqrt({0})); supported: 0, -1, -2, -3, -7, -11, 2, 5")]
    UnsupportedField(i64),
    #[error("{0} is not squarefree")]
    NotSquarefree(i64),
    #[error("elements belong to different fields (D = {0} and D = {1})")]
    FieldMismatch(i64, i64),
    #[error("both arguments are zero")]
    BothZero,
    #[error("input is not an algebraic integer: {0}")]
    NonIntegerInput(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("matrix does not have determinant one")]
    NotUnimodular,
    #[error("cusp is not in normal form")]
    NotNormalized,
    #[error("cusps must be distinct")]
    EqualCusps,
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("model kind does not match field D = {0}")]
    ModelMismatch(i64),
    #[error("flow-form fit residual {residual:e} exceeds {tolerance:e}")]
    FitResidualExceeded { residual: f64, tolerance: f64 },
    #[error("no second cusp found down to flow level {0:e}")]
    NoSecondCusp(f64),
    #[error("point is not on the tie set (relative gap {0:e})")]
    NotOnTieSet(f64),
    #[error("Newton iteration did not converge (residual {0:e})")]
    NewtonDiverged(f64),
    #[error("tie at height {height} is dominated by {cusp} at height {other}")]
    DominatedTie {
        cusp: String,
        height: f64,
        other: f64,
    },
    #[error("tie residual {0:e} too large for rank computation")]
    ResidualTooLarge(f64),
    #[error("basis is singular (condition number {0:e})")]
    SingularBasis(f64),
    #[error("vectors {0} and {1} have positive inner product {2:e}")]
    NotObtuse(usize, usize, f64),
    #[error("vectors {0} and {1} have non-negative inner product {2:e}")]
    NotStrictlyObtuse(usize, usize, f64),
    #[error("certificate violated: {0}")]
    CertificateViolated(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("orbit search bound exceeded for tie set of order {0}")]
    SearchBoundExceeded(usize),
    #[error("incidence missing for cell {0}")]
    IncidenceMissing(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SpineError>;

impl From<std::io::Error> for SpineError {
    fn from(e: std::io::Error) -> Self {
        SpineError::Io(e.to_string())
    }
}
