use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {left} modes vs {right} modes")]
    GridMismatch { left: usize, right: usize },

    #[error("under-resolved potential: {0}")]
    Resolution(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("oracle too large: {points} quadrature evaluations exceed the budget of {budget}")]
    OracleTooLarge { points: u128, budget: u128 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("blow-up guard tripped at t = {t}: {reason}")]
    BlowUp { t: f64, reason: String },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
