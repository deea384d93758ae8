use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("operation undefined for dimension n = {0}")]
    UndefinedForDimension(usize),
    #[error("rotated angle of eigenvalue {lambda} reaches ±π/2: graph is no longer graphical")]
    PoleError { lambda: f64 },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite values encountered during the flow")]
    NanBlowup,
    #[error("initial data generation failed after {rejects} rejections: {reason}")]
    GenerationFailed { rejects: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
