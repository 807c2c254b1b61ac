use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("a state needs at least 2 levels, got {0}")]
    EmptyOrSingleLevel(usize),

    #[error("weight {value} at level {index} is negative or not finite")]
    NegativeWeight { index: usize, value: f64 },

    #[error("all weights are zero")]
    AllZero,

    #[error("probabilities sum to {0}, expected 1")]
    NotNormalized(f64),

    #[error("invalid detection context: {0}")]
    InvalidContext(String),

    #[error("outcome with {k} clicks has zero probability")]
    ImpossibleOutcome { k: usize },

    #[error("probability {0} is outside [0, 1]")]
    OutOfRange(f64),

    #[error("level {0} has zero prior probability")]
    UnsupportedLevel(usize),

    #[error("level {n} cannot emit {k} photons")]
    LevelBelowClicks { n: usize, k: usize },

    #[error("distribution puts mass on level {0} outside the reference support")]
    SupportViolation(usize),

    #[error("expected a two-level prior, got {0} levels")]
    NotAQubit(usize),

    #[error("ratio identity is undefined at tau = 0")]
    DegenerateRatio,

    #[error("mean excitation equals the top level N = {0}; averaged reversal balance is undefined")]
    DegenerateMean(usize),

    #[error("at least {min} trials are required, got {got}")]
    TooFewTrials { got: u64, min: u64 },

    #[error("outcome k = {k} observed {count} times, need at least {min}")]
    OutcomeTooRare { k: usize, count: u64, min: u64 },

    #[error("decay term has no interior maximum on the grid")]
    NoInteriorPeak,

    #[error("ground state has zero prior; saturation value is infinite")]
    GroundStateUnsupported,

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
