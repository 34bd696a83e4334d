use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension {0}: need n >= 2")]
    InvalidDimension(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameter {s} outside domain [{a}, {b}]")]
    Domain { s: f64, a: f64, b: f64 },
    #[error("degenerate configuration at s = {s}: {detail}")]
    Degenerate { s: f64, detail: String },
    #[error("frequency outside the admissible region: {0}")]
    Localisation(String),
    #[error("root not bracketed: {0}")]
    RootMissing(String),
    #[error("root outside the search window: {0}")]
    OutOfWindow(String),
    #[error("iteration failed to converge: {0}")]
    Convergence(String),
    #[error("accuracy target {target:e} not reached; achieved {achieved:e}")]
    Accuracy { target: f64, achieved: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("frequency {freq} exceeds the grid Nyquist limit {nyquist}")]
    Nyquist { freq: f64, nyquist: f64 },
    #[error("grid needs {required} bytes, budget is {budget} bytes")]
    Budget { required: u64, budget: u64 },
    #[error("curve leaves the fundamental cell: {0}")]
    Wrap(String),
    #[error("supports overlap: {0}")]
    Overlap(String),
    #[error("reflect the frequency: {0}")]
    Symmetry(String),
    #[error("config error in `{field}`: {detail}")]
    Config { field: String, detail: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
