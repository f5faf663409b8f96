use alloc::string::String;

/// Errors raised by the design, criterion and construction routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("covariance is not positive semidefinite (eigenvalue {min_eigenvalue:e} vs max {max_eigenvalue:e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid region: {0}")]
    InvalidRegion(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error("design has UE(s^2) = 0 but the reference is positive")]
    ZeroUe2,
    #[error("support touches degenerate (constant) column {column}")]
    DegenerateSupport { column: usize },
    #[error("active correlation block is singular (condition number {condition:e})")]
    SingularCA { condition: f64 },
    #[error("support set is empty")]
    EmptySupportSet,
    #[error("sign vector set is empty")]
    EmptySignSet,
    #[error("Riemann step must be positive")]
    NonPositiveStep,
    #[error("support of size {k} has too many sign vectors to enumerate")]
    TooManySigns { k: usize },
    #[error("correlation c = {c} outside ({lower}, {upper})")]
    InvalidC { c: f64, lower: f64, upper: f64 },
    #[error("condition needs k >= 2")]
    DegenerateK,
    #[error("block construction needs even n >= 6, got {n}")]
    OddN { n: usize },
    #[error("column budget violated: {0}")]
    ColumnBudget(String),
    #[error("requested {blocks} blocks but only {max} distinct supports exist")]
    TooManyBlocks { blocks: usize, max: usize },
    #[error("no start reached the Var(s+) constraints")]
    InfeasibleConstraints,
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("non-finite input")]
    NonFinite,
}

pub type Result<T> = core::result::Result<T, Error>;
