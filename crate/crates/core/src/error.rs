use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("composite space needs at least one mode")]
    EmptySpace,
    #[error(
        "mode `{label}` has cutoff {cutoff}; cutoff must be >= 2 (exactly 2 for two-level modes)"
    )]
    InvalidCutoff { label: String, cutoff: usize },
    #[error("expected {expected} occupations, got {got}")]
    OccupationLength { expected: usize, got: usize },
    #[error("occupation {occupation} of mode {mode} exceeds cutoff {cutoff}")]
    OccupationOutOfRange {
        mode: usize,
        occupation: usize,
        cutoff: usize,
    },
    #[error("mode index {index} out of range for a space with {modes} modes")]
    ModeIndex { index: usize, modes: usize },
    #[error("mode {index} has the wrong kind: expected {expected}")]
    ModeKind {
        index: usize,
        expected: &'static str,
    },
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid sweep profile: {0}")]
    InvalidProfile(String),
    #[error("time {t} outside sweep window [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },
    #[error("step control failed: error estimate {estimate:e} above tolerance {tolerance:e} at {steps} steps")]
    StepControl {
        tolerance: f64,
        estimate: f64,
        steps: usize,
    },
    #[error("sweep not adiabatic: margin {margin:.4} exceeds threshold {threshold:.4}")]
    NotAdiabatic { margin: f64, threshold: f64 },
    #[error("initial detuning ratio |delta(0)|/g = {ratio:.3} below required {required}")]
    DetuningRatio { ratio: f64, required: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("leakage {leakage:.3e} out of the computational subspace exceeds {limit:.1e}")]
    Leakage { leakage: f64, limit: f64 },
    #[error("step {index}: {source}")]
    Step {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_step(self, index: usize) -> Self {
        Error::Step {
            index,
            source: Box::new(self),
        }
    }
}
