use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent configuration. `line` is 1-based when known.
    #[error("config error{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("time order violated: t = {t} < s = {s}")]
    Order { s: f64, t: f64 },

    /// Non-finite values or H¹ norm above the guard radius.
    #[error("blow-up at t = {time}: H1 norm {norm} exceeds guard {guard}")]
    BlowUp { time: f64, norm: f64, guard: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("nonlinearity is not asymptotically linear: {0}")]
    NotAsymptoticallyLinear(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("trajectory too short: need {needed} samples after base, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(message: impl Into<String>) -> Self {
        Error::Config { line: None, message: message.into() }
    }

    pub fn config_at(line: usize, message: impl Into<String>) -> Self {
        Error::Config { line: Some(line), message: message.into() }
    }

    /// Process exit status used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) => 1,
            Error::Config { .. } | Error::Dimension(_) | Error::Domain(_) | Error::Order { .. } => 2,
            Error::BlowUp { .. } => 3,
            Error::NotAsymptoticallyLinear(_) => 4,
            Error::Numeric(_) | Error::TooShort { .. } => 5,
            Error::Io(_) | Error::Csv(_) => 5,
        }
    }
}
