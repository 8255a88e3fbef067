use thiserror::Error;

/// Which diagonal block of a split metric a positivity failure refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// `g_{ww̄}`, the block on the upper-half-plane factor.
    Hyperbolic,
    /// `g_{zz̄}`, the block on the complex-line factor.
    Fiber,
}

impl std::fmt::Display for Block {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Block::Hyperbolic => f.write_str("g_ww"),
            Block::Fiber => f.write_str("g_zz"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix parse error: {0}")]
    Parse(String),

    #[error("determinant is {0}, expected 1")]
    DetNotOne(i64),

    #[error("characteristic polynomial has only real roots (not Inoue type)")]
    RealSpectrum,

    #[error("real eigenvalue {0} is not > 1")]
    LambdaNotExpanding(f64),

    #[error("eigenvector lattice basis is degenerate (|det V| = {0:e})")]
    DegenerateEigenvectors(f64),

    #[error("invalid chart parameter: {0}")]
    InvalidChart(String),

    #[error("index {index:?} out of range for grid {shape:?}")]
    IndexOutOfRange { index: [i64; 4], shape: [usize; 4] },

    #[error("non-positive height Im w = {0}")]
    NonPositiveHeight(f64),

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("finite-difference stencil leaves the upper half plane (Im w = {imw}, h = {h})")]
    StencilOutOfDomain { imw: f64, h: f64 },

    #[error("field has {got} samples, chart expects {expected}")]
    ResolutionMismatch { expected: usize, got: usize },

    #[error("metric block {block} not positive at index {index:?}: value {value:e} (t = {t})")]
    NotPositive {
        t: f64,
        index: [usize; 4],
        block: Block,
        value: f64,
    },

    #[error("unstable step at t = {t}: {reason}")]
    UnstableStep { t: f64, reason: String },

    #[error("could not satisfy the initial positivity margin after {0} halvings")]
    CannotSatisfyPositivity(usize),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("solver failed at t = {t}: {source}")]
    SolverFailed {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
