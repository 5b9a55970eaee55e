//! Long-horizon dynamics of flows driven by polynomial potentials that are
//! degenerate at the origin: spherical critical structure, finite-dimensional
//! reductions, phase-space spectral coordinates, adaptive integration, and
//! decay-rate classification.

pub mod classify;
pub mod error;
pub mod integrate;
mod numeric;
mod ode;
pub mod potential;
pub mod reduction;
pub mod spectral;
pub mod sphere;

pub use classify::{
    ArcLength, ClassifierConfig, ExponentialFit, FastDecayCase, FastDecayReport, MzReport,
    MzVerdict, PlateauStats, RateReport, RateVerdict, ResidualMode, ResidualReport,
};
pub use integrate::{
    Chart, EllipticRun, IntegratorConfig, NonlinearPerturbation, ParabolicRun, Perturbation,
    PerturbationDirection, PolarSeries, SlowManifoldRun, Termination, Trajectory,
};
pub use potential::{Jet, JetOrder, LeadingPart, Polynomial};
pub use reduction::{Decomposition, Linearization, ModelSystem, ReducedFunctional};
pub use spectral::{
    Coefficients, ModeClass, ModeLabel, PhaseVector, PsiBasis, SpectralReport, SpectralSystem,
};
pub use sphere::{
    AdamsSimonVerdict, CriticalCatalog, LojasiewiczFit, MorseSignature, SphericalCritical,
};
