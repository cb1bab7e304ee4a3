use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("metric is not positive definite at grid point {point} (min eigenvalue {value:e})")]
    NonPositiveMetric { point: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("bidegree mismatch: ({0},{1}) vs ({2},{3})")]
    BidegreeMismatch(usize, usize, usize, usize),
    #[error("forms live on different fibers")]
    FiberMismatch,
    #[error("bidegree ({p},{q}) out of range for n={n}")]
    BidegreeOutOfRange { p: usize, q: usize, n: usize },
    #[error("no spectral gap of ratio >= {ratio:e} around threshold {threshold:e}")]
    AmbiguousKernel { threshold: f64, ratio: f64 },
    #[error("harmonic space is empty for bidegree ({p},{q})")]
    EmptyHarmonicSpace { p: usize, q: usize },
    #[error("form has no base-direction data")]
    MissingBaseStencil,
    #[error("base stencil leaves the admissible domain: {0}")]
    StencilOutOfDomain(String),
    #[error("Gram matrix is ill conditioned (condition number {0:e})")]
    IllConditionedGram(f64),
    #[error("theta truncation M={0} is too coarse (need M >= 3)")]
    TruncationTooCoarse(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("iteration did not converge: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
