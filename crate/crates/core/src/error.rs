use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A drift or diffusion evaluation produced a non-finite value.
    #[error("non-finite value while evaluating {what} at state {state:?}")]
    NumericalDomain { what: &'static str, state: Vec<f64> },

    /// The model cannot provide the requested operation.
    #[error("unsupported operation: {0}")]
    Capability(String),

    #[error("reflection direction undefined: the two states coincide")]
    DegenerateDirection,

    #[error("step {step} failed: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit refused: {0}")]
    FitWindow(String),

    #[error("singular Jacobian (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("Newton inversion did not converge after {iterations} iterations (residual {residual:e})")]
    Inversion { iterations: usize, residual: f64 },

    #[error("model construction: {0}")]
    Construction(String),

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config key `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn at_step(self, step: u64) -> Self {
        Error::AtStep {
            step,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
