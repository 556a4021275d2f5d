use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("field amplitude eta must be positive and finite, got {0}")]
    EtaNotPositive(f64),
    #[error("sweep frequency nu must be positive and finite, got {0}")]
    NuNotPositive(f64),
    #[error("sweep frequency nu = {nu} exceeds amplitude eta = {eta}; kappa = sqrt(1-(nu/eta)^2) would be imaginary")]
    NuExceedsEta { nu: f64, eta: f64 },
    #[error("invalid spin quantum number {0}: 2j must be a positive integer")]
    InvalidSpin(String),
    #[error("spin j = {0} is above the supported maximum of 50")]
    SpinTooLarge(f64),
    #[error("level m = {m} is not a valid projection for j = {j}")]
    InvalidLevel { m: f64, j: f64 },
    #[error("time interval runs backwards: t0 = {t0} > t1 = {t1}")]
    BackwardInterval { t0: f64, t1: f64 },
    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("{what} is only defined for j = 1/2 (got j = {j}); {hint}")]
    RequiresSpinHalf { what: &'static str, j: f64, hint: &'static str },
    #[error("window half-width must be positive, got {0}")]
    NonPositiveWindow(f64),
    #[error("initial state is not normalized (norm = {0})")]
    NotNormalized(f64),
    #[error("state has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("integrator tolerance {0} outside [1e-13, 1e-4]")]
    InvalidTolerance(f64),
    #[error("Bloch vector of length {0} is not a physical state")]
    UnphysicalBloch(f64),
    #[error("damping rate {name} must be non-negative and finite, got {value}")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("adiabatic level {level} lost at t = {t} (overlap {overlap:.3} <= 0.5); use a finer grid")]
    LevelTracking { t: f64, level: usize, overlap: f64 },
    #[error("adiabatic spectrum is degenerate at t = {t} (gap {gap:e})")]
    DegenerateSpectrum { t: f64, gap: f64 },
    #[error("integrator step size underflow at t = {0}")]
    StepSizeUnderflow(f64),
    #[error("integrator exceeded {0} steps")]
    TooManySteps(usize),
    #[error("output grid must be monotone and start at the initial time")]
    InvalidGrid,
    #[error("trajectories do not share a common time grid")]
    GridMismatch,
    #[error("time {0} is not on the trajectory grid")]
    TimeNotOnGrid(f64),
    #[error("configuration error: {0}")]
    Config(String),
}
