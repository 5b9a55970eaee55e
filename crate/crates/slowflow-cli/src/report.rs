//! Report bodies written by the experiments. Plain vectors and strings
//! everywhere so the JSON stays diff-friendly and stable; the library's
//! richer types are flattened at the boundary.

use serde::Serialize;
use slowflow::{
    AdamsSimonVerdict, ArcLength, CriticalCatalog, ExponentialFit, FastDecayCase, FastDecayReport,
    LojasiewiczFit, ModeClass, PlateauStats, RateReport, RateVerdict, ReducedFunctional,
    ResidualReport, SpectralReport, Termination,
};

pub fn termination_str(t: Termination) -> &'static str {
    match t {
        Termination::Horizon => "horizon",
        Termination::Floor => "floor",
        Termination::StepFailure => "step_failure",
        Termination::Escaped => "escaped",
    }
}

pub fn mode_class_str(c: ModeClass) -> &'static str {
    match c {
        ModeClass::Rotating => "rotating",
        ModeClass::Resonant => "resonant",
        ModeClass::Kernel => "kernel",
        ModeClass::Hyperbolic => "hyperbolic",
    }
}

fn dvec(v: &nalgebra::DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

#[derive(Serialize)]
pub struct VerdictDto {
    /// "exponential" | "case1" | "case2" | "inconclusive"
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accumulation: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tail_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&RateVerdict> for VerdictDto {
    fn from(v: &RateVerdict) -> Self {
        let mut dto = VerdictDto {
            kind: "inconclusive",
            gamma: None,
            beta: None,
            alpha0: None,
            theta_star: None,
            accumulation: None,
            max_tail_distance: None,
            reason: None,
        };
        match v {
            RateVerdict::Exponential { gamma } => {
                dto.kind = "exponential";
                dto.gamma = Some(*gamma);
            }
            RateVerdict::AlgebraicCase1 {
                beta,
                theta_star,
                alpha0,
            } => {
                dto.kind = "case1";
                dto.beta = Some(*beta);
                dto.theta_star = Some(dvec(theta_star));
                dto.alpha0 = Some(*alpha0);
            }
            RateVerdict::AlgebraicCase2 {
                accumulation,
                max_tail_distance,
            } => {
                dto.kind = "case2";
                dto.accumulation = Some(accumulation.iter().map(dvec).collect());
                dto.max_tail_distance = Some(*max_tail_distance);
            }
            RateVerdict::Inconclusive { reason } => {
                dto.reason = Some(reason.clone());
            }
        }
        dto
    }
}

#[derive(Serialize)]
pub struct ArcDto {
    pub total: f64,
    pub remaining_last_decade: f64,
    pub converging: bool,
}

impl ArcDto {
    pub fn new(arc: &ArcLength, t_end: f64) -> Self {
        ArcDto {
            total: arc.total,
            remaining_last_decade: arc.remaining_after(t_end / 10.0),
            converging: arc.converging,
        }
    }
}

#[derive(Serialize)]
pub struct ClassifyReport {
    pub verdict: VerdictDto,
    pub p: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plateau: Option<PlateauStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponential: Option<ExponentialFit>,
    pub arc: ArcDto,
    pub termination: &'static str,
    pub catalog: CatalogSummary,
}

impl ClassifyReport {
    pub fn new(
        rate: &RateReport,
        arc: ArcDto,
        termination: Termination,
        catalog: &CriticalCatalog,
    ) -> Self {
        ClassifyReport {
            verdict: VerdictDto::from(&rate.verdict),
            p: rate.p,
            plateau: rate.plateau.clone(),
            exponential: rate.exponential.clone(),
            arc,
            termination: termination_str(termination),
            catalog: CatalogSummary::from(catalog),
        }
    }
}

#[derive(Serialize)]
pub struct PointDto {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad_residual: f64,
    /// Tangential Hessian inertia: (negative, zero, positive).
    pub morse: (usize, usize, usize),
    pub cluster_id: usize,
}

impl From<&slowflow::SphericalCritical> for PointDto {
    fn from(p: &slowflow::SphericalCritical) -> Self {
        PointDto {
            theta: dvec(&p.theta),
            value: p.value,
            grad_residual: p.grad_residual,
            morse: (
                p.morse_signature.negative,
                p.morse_signature.zero,
                p.morse_signature.positive,
            ),
            cluster_id: p.cluster_id,
        }
    }
}

#[derive(Serialize)]
pub struct ManifoldDto {
    pub cluster_id: usize,
    pub value: f64,
    pub start_share: f64,
    pub angular_spread: f64,
    pub representative: PointDto,
}

#[derive(Serialize)]
pub struct CatalogSummary {
    pub dim: usize,
    pub degree: u32,
    pub n_points: usize,
    pub n_manifolds: usize,
    pub values: Vec<f64>,
    pub min_gap: f64,
}

impl From<&CriticalCatalog> for CatalogSummary {
    fn from(c: &CriticalCatalog) -> Self {
        CatalogSummary {
            dim: c.dim,
            degree: c.degree,
            n_points: c.points.len(),
            n_manifolds: c.manifolds.len(),
            values: c.values.clone(),
            min_gap: c.min_gap,
        }
    }
}

#[derive(Serialize)]
pub struct AdamsSimonDto {
    /// "positivity" | "nonnegativity_only" | "fails"
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness_theta: Option<Vec<f64>>,
    pub adjusted_value: f64,
}

impl From<&AdamsSimonVerdict> for AdamsSimonDto {
    fn from(v: &AdamsSimonVerdict) -> Self {
        match v {
            AdamsSimonVerdict::Positivity {
                witness,
                adjusted_value,
            } => AdamsSimonDto {
                kind: "positivity",
                witness_theta: Some(dvec(&witness.theta)),
                adjusted_value: *adjusted_value,
            },
            AdamsSimonVerdict::NonNegativityOnly {
                witness,
                adjusted_value,
            } => AdamsSimonDto {
                kind: "nonnegativity_only",
                witness_theta: Some(dvec(&witness.theta)),
                adjusted_value: *adjusted_value,
            },
            AdamsSimonVerdict::Fails { max_adjusted } => AdamsSimonDto {
                kind: "fails",
                witness_theta: None,
                adjusted_value: *max_adjusted,
            },
        }
    }
}

#[derive(Serialize)]
pub struct CriticalReport {
    pub degree: u32,
    pub catalog: CatalogSummary,
    pub points: Vec<PointDto>,
    pub manifolds: Vec<ManifoldDto>,
    pub n_starts: usize,
    pub n_converged: usize,
    pub adams_simon: AdamsSimonDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lojasiewicz: Option<LojasiewiczDto>,
}

#[derive(Serialize)]
pub struct LojasiewiczDto {
    pub c1: f64,
    pub rho1: f64,
    pub fit_r2: f64,
    pub n_used: usize,
}

impl From<&LojasiewiczFit> for LojasiewiczDto {
    fn from(f: &LojasiewiczFit) -> Self {
        LojasiewiczDto {
            c1: f.c1,
            rho1: f.rho1,
            fit_r2: f.fit_r2,
            n_used: f.n_used,
        }
    }
}

#[derive(Serialize)]
pub struct TermDto {
    pub coeff: f64,
    pub exponents: Vec<u32>,
}

#[derive(Serialize)]
pub struct ReductionDto {
    /// Text form of the reduced functional.
    pub functional: String,
    pub terms: Vec<TermDto>,
    pub fit_degree: u32,
    pub residual_sup: f64,
    pub p: u32,
    pub leading: String,
    pub domain_radius: f64,
    pub grid: usize,
    pub kernel_dim: usize,
    pub eigenvalues: Vec<f64>,
}

impl ReductionDto {
    pub fn new(red: &ReducedFunctional, kernel_dim: usize, eigenvalues: &[f64]) -> Self {
        ReductionDto {
            functional: red.f.to_string(),
            terms: red
                .f
                .terms()
                .map(|(coeff, exps)| TermDto {
                    coeff,
                    exponents: exps.to_vec(),
                })
                .collect(),
            fit_degree: red.fit_degree,
            residual_sup: red.residual_sup,
            p: red.p,
            leading: red.f_p.to_string(),
            domain_radius: red.domain_radius,
            grid: red.grid,
            kernel_dim,
            eigenvalues: eigenvalues.to_vec(),
        }
    }
}

#[derive(Serialize)]
pub struct FlowReport {
    pub termination: &'static str,
    pub n_accepted: u64,
    pub n_rejected: u64,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub final_radius: f64,
    pub final_t_pow_r: f64,
    pub final_fhat: f64,
    pub arc: ArcDto,
    pub polar_truncated: bool,
    pub p: u32,
}

/// Plateau bookkeeping of a rescaled magnitude over the last decade.
#[derive(Serialize)]
pub struct TPowDto {
    /// The rescaling exponent 1/(p-2).
    pub exponent: f64,
    pub last: f64,
    pub window_mean: f64,
    pub relative_oscillation: f64,
    pub window: (f64, f64),
    pub n_window: usize,
}

impl TPowDto {
    /// Statistics of t^exponent * mag over the trailing decade.
    pub fn over_last_decade(times: &[f64], mags: &[f64], exponent: f64) -> Option<Self> {
        let t_end = *times.last()?;
        let scaled: Vec<(f64, f64)> = times
            .iter()
            .zip(mags)
            .filter(|(t, _)| **t >= t_end / 10.0 && **t > 0.0)
            .map(|(t, m)| (*t, t.powf(exponent) * m))
            .collect();
        if scaled.is_empty() {
            return None;
        }
        let mean = scaled.iter().map(|(_, v)| v).sum::<f64>() / scaled.len() as f64;
        let min = scaled.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        let max = scaled
            .iter()
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(TPowDto {
            exponent,
            last: scaled.last().map(|(_, v)| *v).unwrap_or(f64::NAN),
            window_mean: mean,
            relative_oscillation: if mean != 0.0 {
                (max - min) / mean.abs()
            } else {
                f64::INFINITY
            },
            window: (scaled[0].0, scaled[scaled.len() - 1].0),
            n_window: scaled.len(),
        })
    }
}

#[derive(Serialize)]
pub struct ResidualDto {
    pub sup_ratio: f64,
    pub eps: f64,
    pub eps_flagged: bool,
    pub truncated: bool,
    /// (decade end, sup of the ratio over that decade), ascending.
    pub decade_sups: Vec<(f64, f64)>,
}

impl From<&ResidualReport> for ResidualDto {
    fn from(r: &ResidualReport) -> Self {
        ResidualDto {
            sup_ratio: r.sup_ratio,
            eps: r.eps,
            eps_flagged: r.eps_flagged,
            truncated: r.truncated,
            decade_sups: r.decade_sups.clone(),
        }
    }
}

#[derive(Serialize)]
pub struct ParabolicReport {
    pub termination: &'static str,
    pub reduction: ReductionDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<ExponentialFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neutral: Option<TPowDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize)]
pub struct FastDecayDto {
    pub gamma_star: f64,
    pub candidates: Vec<f64>,
    /// "simple" | "resonant_growth" | "oscillatory"
    pub kind: &'static str,
    pub rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficient: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matched_beta: Option<f64>,
}

impl From<&FastDecayReport> for FastDecayDto {
    fn from(r: &FastDecayReport) -> Self {
        let mut dto = FastDecayDto {
            gamma_star: r.gamma_star,
            candidates: r.candidates.clone(),
            kind: "simple",
            rate: f64::NAN,
            direction: None,
            coefficient: None,
            frequency: None,
            matched_beta: None,
        };
        match &r.case {
            FastDecayCase::Simple { rate, direction } => {
                dto.rate = *rate;
                dto.direction = Some(dvec(direction));
            }
            FastDecayCase::ResonantGrowth { rate, coefficient } => {
                dto.kind = "resonant_growth";
                dto.rate = *rate;
                dto.coefficient = Some(*coefficient);
            }
            FastDecayCase::Oscillatory {
                rate,
                frequency,
                matched_beta,
            } => {
                dto.kind = "oscillatory";
                dto.rate = *rate;
                dto.frequency = Some(*frequency);
                dto.matched_beta = Some(*matched_beta);
            }
        }
        dto
    }
}

#[derive(Serialize)]
pub struct EllipticReport {
    pub m: f64,
    pub termination: &'static str,
    pub classes: Vec<&'static str>,
    pub candidate_rates: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gram_rate: Option<ExponentialFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fast_decay: Option<FastDecayDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<ResidualDto>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Serialize)]
pub struct SlowManifoldReport {
    pub m: f64,
    pub termination: &'static str,
    pub reduction: ReductionDto,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_pow: Option<TPowDto>,
    pub theta_star: Vec<f64>,
    /// Leading part at the limit direction, scaled by 1/m.
    pub alpha0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicted_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consistent: Option<bool>,
}

#[derive(Serialize)]
pub struct SpectralReportDto {
    pub m: f64,
    pub lambdas: Vec<f64>,
    pub classes: Vec<&'static str>,
    pub candidate_rates: Vec<f64>,
    pub kernel_start: usize,
    pub kernel_dim: usize,
    pub identities: SpectralReport,
}
