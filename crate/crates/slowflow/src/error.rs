//! Error types, one enum per domain module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("dimension mismatch: polynomial in {expected} variables, point has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("term {index}: {got} exponents, expected {expected}")]
    TermArity {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("term {index}: coefficient is not finite")]
    NonFiniteCoeff { index: usize },
    #[error("tolerance must be finite and nonnegative, got {0}")]
    InvalidTolerance(f64),
    #[error("text form, line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error(
        "degree-{degree} part has coefficient {coeff:e} above tolerance; \
         the potential must vanish to second order at the origin"
    )]
    LowDegreePart { degree: u32, coeff: f64 },
    #[error("no coefficient of degree >= 3 exceeds the tolerance")]
    NoLeadingPart,
}

#[derive(Debug, Error)]
pub enum SphereError {
    #[error("direction has norm {norm}, expected a unit vector")]
    NotUnit { norm: f64 },
    #[error("potential part must be homogeneous; found degrees {low} and {high}")]
    NotHomogeneous { low: u32, high: u32 },
    #[error("dimension mismatch: polynomial in {expected} variables, direction has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("homogeneity degree must be at least 3, got {0}")]
    DegreeTooLow(u32),
    #[error("search needs at least one start")]
    NoStarts,
    #[error("no start converged within the iteration budget (best residual {best:e})")]
    NoConvergence { best: f64 },
    #[error("catalog has no critical points to test")]
    EmptyCatalog,
    #[error("first-order coefficient m must be nonzero and finite")]
    ZeroM,
    #[error("predicted rate needs a positive critical value, got {0}")]
    NonPositiveValue(f64),
    #[error("exponent fit degenerate: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Error)]
pub enum ReductionError {
    #[error("functional must vanish to second order at the origin ({what})")]
    NotCriticalAtOrigin { what: String },
    #[error("linearization has no kernel (no zero eigenvalue within tolerance)")]
    EmptyKernel,
    #[error("corrector iteration stalled at residual {residual:e} after {iterations} steps")]
    CorrectorDiverged { residual: f64, iterations: usize },
    #[error("reduced fit keeps a degree-{degree} coefficient of size {coeff:e}; the reduction should start at degree 3")]
    LowOrderContamination { degree: u32, coeff: f64 },
    #[error("fit grid must have at least {need} nodes per axis, got {got}")]
    GridTooSmall { need: usize, got: usize },
    #[error("fit degree {degree} needs more grid nodes than {nodes}^{dim}")]
    UnderdeterminedFit {
        degree: u32,
        nodes: usize,
        dim: usize,
    },
    #[error("domain radius must be positive and finite, got {0}")]
    BadDomainRadius(f64),
    #[error("dimension mismatch: system in {expected} variables, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("operator must be symmetric, max asymmetry {0:e}")]
    AsymmetricOperator(f64),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("first-order coefficient m must be nonzero")]
    ZeroM,
    #[error("eigenvalue {index} is not finite")]
    NonFiniteEigenvalue { index: usize },
    #[error("system has no zero eigenvalue; kernel quantities are undefined")]
    EmptyKernel,
    #[error("dimension mismatch: system of size {expected}, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("perturbation exponent offset must lie in (0, 1/2), got {0}")]
    BadEpsilon(f64),
    #[error("tolerances must be positive and finite (rel {rel}, abs {abs})")]
    BadTolerance { rel: f64, abs: f64 },
    #[error("horizon must exceed the start time ({t0} -> {t_end})")]
    BadHorizon { t0: f64, t_end: f64 },
    #[error("output schedule: {0}")]
    BadSchedule(String),
    #[error("initial state must be finite")]
    NonFiniteInitial,
    #[error("perturbation amplitude must be finite and nonnegative, got {0}")]
    BadAmplitude(f64),
    #[error("nonlinear perturbation prefactor must vanish at the origin")]
    PerturbationConstantTerm,
    #[error("dimension mismatch: field of size {expected}, state has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("need at least {need} usable samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series must be strictly increasing in time at index {0}")]
    NonMonotoneTime(usize),
    #[error("no samples above the floor to work with")]
    AllBelowFloor,
    #[error("series spans {got:.2} decades in time, need {need}")]
    ShortSpan { need: f64, got: f64 },
    #[error("critical-point catalog is empty")]
    EmptyCatalog,
    #[error("residual exponent offset must lie in (0, 2), got {0}")]
    BadExponent(f64),
    #[error("dominance series must be positive in total at sample {0}")]
    NonPositiveSeries(usize),
    #[error("dominance gap must be a positive real, got {0}")]
    BadGap(f64),
    #[error(
        "rate {rate} matches no spectral candidate within tolerance {tol}; \
         possible nonlinear contamination, extend the horizon"
    )]
    NoRateMatch { rate: f64, tol: f64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}
