use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singularity: {0}")]
    Singularity(String),
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("solver error: {message} (condition estimate {condition:.3e})")]
    Solver { message: String, condition: f64 },
    #[error("stiffness error: {message} (smallest eigenvalue {smallest_eigenvalue:.3e})")]
    Stiffness { message: String, smallest_eigenvalue: f64 },
    #[error("consistency error: {0}")]
    Consistency(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
