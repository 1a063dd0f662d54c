use thiserror::Error;

pub type Result<T> = std::result::Result<T, CsteError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsteError {
    /// Argument outside the domain of a basis or kernel.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid input: {0}")]
    Input(String),

    /// Cell-addressed data problem. `row` is 1-based and counts data rows (header excluded).
    #[error("row {row}, column \"{column}\": {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("quasi-separation detected: {0}")]
    Separation(String),

    #[error("insufficient data at x0 = {x0}: {message}")]
    InsufficientData { x0: f64, message: String },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CsteError {
    /// Whether the error stems from user input (as opposed to a solver failure).
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            CsteError::Domain(_)
                | CsteError::Parameter(_)
                | CsteError::Input(_)
                | CsteError::Cell { .. }
                | CsteError::Schema(_)
        )
    }
}
