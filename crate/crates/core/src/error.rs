use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("L^p integral diverges: delta * p = {product} <= 1")]
    Divergent { product: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("pole: {0}")]
    Pole(String),

    #[error("enumeration of {count} combinations exceeds the cap of {cap}")]
    SizeCap { count: f64, cap: f64 },

    #[error("step size underflow at x = {x}: h = {h:e}")]
    StepUnderflow { x: f64, h: f64 },

    #[error("degenerate solution: {0}")]
    Degenerate(String),

    #[error("infeasible coefficients: {0}")]
    Infeasible(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
    Usage,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_) | Error::Infeasible(_) | Error::Constraint(_) => {
                ErrorClass::Validation
            }
            Error::Domain(_) | Error::Precondition(_) | Error::Json(_) => ErrorClass::Usage,
            Error::Divergent { .. }
            | Error::Pole(_)
            | Error::SizeCap { .. }
            | Error::StepUnderflow { .. }
            | Error::Degenerate(_)
            | Error::Io(_) => ErrorClass::Numerical,
        }
    }
}
