use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("parameter `{field}` must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("grid needs at least 8 cells per direction, got {nx}x{ny}")]
    GridTooCoarse { nx: usize, ny: usize },
    #[error("orientation vector has norm {norm}, expected 1")]
    CorruptedOrientation { norm: f64 },
    #[error("invalid initial data: {reason}")]
    InvalidInitial { reason: String },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix of size {n} is not positive definite")]
    NotPositiveDefinite { n: usize },
    #[error("singular {context} system")]
    Singular { context: &'static str },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum GridError {
    #[error("pressure Poisson solve did not reach tolerance, residual history {residuals:?}")]
    PoissonFailed { residuals: Vec<f64> },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("time step {dt} violates the advective CFL bound; suggested dt = {suggested}")]
    CflViolation { dt: f64, suggested: f64 },
    #[error("linear solve failed: relative residual {residual}")]
    LinearSolve { residual: f64 },
    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid time step {dt}")]
    InvalidTimeStep { dt: f64 },
    #[error("inertia operator cannot be factorized: {0}")]
    Factorization(#[from] LinalgError),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpectralError {
    #[error("reduced basis has rank {rank}, expected {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("Arnoldi converged {converged} of {wanted} eigenvalues with subspace {krylov_dim}")]
    NoConvergence {
        converged: usize,
        wanted: usize,
        krylov_dim: usize,
    },
    #[error("kernel and range intersect (principal angle {angle:e}); no spectral splitting")]
    KernelRangeIntersect { angle: f64 },
    #[error("operator has trivial kernel")]
    TrivialKernel,
    #[error("matrix is not symmetric positive definite: {reason}")]
    NotSpd { reason: String },
    #[error("fractional exponent {alpha} outside [0, 1]")]
    AlphaOutOfRange { alpha: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum DecayError {
    #[error("only {found} positive samples in the fit window, need {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("spectral gap is not positive ({gap:?})")]
    NoGap { gap: Option<f64> },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EnergyError {
    #[error("trajectory was produced in {found} mode, expected linear")]
    NotLinearMode { found: &'static str },
    #[error("need at least {needed} energy records, got {found}")]
    TooFewRecords { needed: usize, found: usize },
}

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ToyError {
    #[error("system dimension {n} does not match {what} of size {got}")]
    Dimension {
        n: usize,
        what: &'static str,
        got: usize,
    },
    #[error("nonlinearity does not vanish on the kernel: |N(u0)| = {residual:e}")]
    NotEquilibrium { residual: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Error, Debug)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Decay(#[from] DecayError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Toy(#[from] ToyError),
}
