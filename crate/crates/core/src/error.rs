use thiserror::Error;

/// Errors raised while building models, solving value fields or running
/// the verification commands.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwingError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("grid misaligned: 1/(L*dt) = {ratio} is not a positive integer (rate L = {rate}, dt = {dt})")]
    MisalignedGrid { rate: f64, dt: f64, ratio: f64 },
    #[error("volume {volume} is not on the volume grid (pitch {pitch})")]
    OffGrid { volume: f64, pitch: f64 },
    #[error("time {time} is not on the time grid (dt {dt})")]
    OffTimeGrid { time: f64, dt: f64 },
    #[error("path count {count} exceeds the exhaustive bound {bound}")]
    TooManyPaths { count: u128, bound: usize },
    #[error("enumeration needs 2^{decision_points} policies, above the cap 2^{cap_log2}")]
    EnumerationCap { decision_points: usize, cap_log2: u32 },
    #[error("duality requires L*T > 1, got L*T = {0}")]
    DualityHypothesis(f64),
    #[error("no admissible stopping rule for the requested constraint")]
    InfeasibleStopping,
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{0} is outside the validity region of this closed form")]
    OutOfRegion(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for SwingError {
    fn from(e: std::io::Error) -> Self {
        SwingError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SwingError>;
