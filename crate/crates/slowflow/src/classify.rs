//! Turns sampled trajectories into verdicts: exponential versus algebraic
//! decay, the slow-decay dichotomy with its limit constants, fast-decay case
//! matching against the spectral rate menu, dominance comparison of mode
//! groups, residual bounds for the reduced dynamics, and secant arc length
//! of the direction curve.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::ClassifyError;
use crate::integrate::{EllipticRun, ParabolicRun, PolarSeries, Trajectory};
use crate::numeric::{fd_weights, line_fit, KahanSum};
use crate::reduction::{self, ModelSystem, ReducedFunctional};
use crate::spectral::{ModeClass, ModeLabel};
use crate::sphere::{angular_distance, CriticalCatalog};

/// Thresholds for all verdicts. Finite-data stand-ins for asymptotic
/// statements; every one is a decision, not a derived constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifierConfig {
    /// Fraction of samples forming the tail window.
    pub tail_fraction: f64,
    /// Minimum usable samples in the tail window.
    pub min_tail_samples: usize,
    /// Log-linear fit quality needed to call a decay exponential.
    pub r2_threshold: f64,
    /// Relative oscillation of the rescaled radius accepted as a plateau.
    pub plateau_tol: f64,
    /// Growth of the rescaled radius over the trailing three decades that
    /// signals divergence.
    pub growth_factor: f64,
    /// Decades of time the dichotomy test requires.
    pub min_decades: f64,
    /// Largest admissible tail distance to the zero-value critical set.
    pub dist_tol: f64,
    /// Relative tolerance of the limit-value cross-check.
    pub value_tol: f64,
    /// Catalog values within this of zero count as the zero-value set.
    pub zero_value_tol: f64,
    /// Absolute slack when matching a fitted rate to a spectral candidate.
    pub rate_tol: f64,
    /// Relative slack when matching a fitted frequency.
    pub freq_tol: f64,
    /// Dominance ratio that must be reached with a decreasing trend.
    pub ratio_tol: f64,
    /// Fraction of the gap b used as slack in the boundedness check.
    pub mz_delta_fraction: f64,
    /// Allowed growth of the weighted total over the window.
    pub mz_bound_factor: f64,
    /// Magnitudes below this are treated as unresolved.
    pub floor_tol: f64,
    /// Half-width of the differencing stencil on the output grid.
    pub fd_half_width: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            tail_fraction: 0.25,
            min_tail_samples: 30,
            r2_threshold: 0.999,
            plateau_tol: 0.02,
            growth_factor: 3.0,
            min_decades: 3.0,
            dist_tol: 1e-3,
            value_tol: 0.01,
            zero_value_tol: 1e-6,
            rate_tol: 0.1,
            freq_tol: 0.02,
            ratio_tol: 0.1,
            mz_delta_fraction: 0.1,
            mz_bound_factor: 10.0,
            floor_tol: 1e-9,
            fd_half_width: 2,
        }
    }
}

fn check_series(times: &[f64], len: usize) -> Result<(), ClassifyError> {
    if times.len() != len {
        return Err(ClassifyError::LengthMismatch(times.len(), len));
    }
    for (i, w) in times.windows(2).enumerate() {
        let increasing = w[1] > w[0];
        if !increasing {
            return Err(ClassifyError::NonMonotoneTime(i + 1));
        }
    }
    Ok(())
}

/// Evidence of a log-linear tail fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentialFit {
    /// Fitted decay rate (the slope of log magnitude against time).
    pub gamma: f64,
    pub r2: f64,
    /// Quality of the competing algebraic fit (log magnitude against
    /// log time), when computable.
    pub r2_algebraic: Option<f64>,
    pub window: (f64, f64),
    pub n_samples: usize,
}

/// Log-linear tail test on the state norms of a trajectory.
pub fn detect_exponential(
    traj: &Trajectory,
    tail_fraction: f64,
    cfg: &ClassifierConfig,
) -> Result<Option<ExponentialFit>, ClassifyError> {
    let mags: Vec<f64> = traj.states.iter().map(|z| z.norm()).collect();
    detect_exponential_series(&traj.times, &mags, tail_fraction, cfg)
}

/// Log-linear tail test on an arbitrary positive magnitude series. Returns
/// the fitted rate when the tail is convincingly log-linear in time AND
/// decays faster than the resolvable floor slope; algebraic decay shows
/// log-log linearity instead and is rejected by the fit comparison.
pub fn detect_exponential_series(
    times: &[f64],
    mags: &[f64],
    tail_fraction: f64,
    cfg: &ClassifierConfig,
) -> Result<Option<ExponentialFit>, ClassifyError> {
    check_series(times, mags.len())?;
    let usable: Vec<(f64, f64)> = times
        .iter()
        .zip(mags)
        .filter(|(_, m)| **m > cfg.floor_tol)
        .map(|(t, m)| (*t, *m))
        .collect();
    if usable.is_empty() {
        return Err(ClassifyError::AllBelowFloor);
    }
    let t_end = usable.last().expect("nonempty").0;
    let n_tail = ((usable.len() as f64 * tail_fraction).ceil() as usize).min(usable.len());
    if n_tail < cfg.min_tail_samples {
        return Err(ClassifyError::TooFewSamples {
            need: cfg.min_tail_samples,
            got: n_tail,
        });
    }
    let tail = &usable[usable.len() - n_tail..];
    let ts: Vec<f64> = tail.iter().map(|(t, _)| *t).collect();
    let logs: Vec<f64> = tail.iter().map(|(_, m)| m.ln()).collect();
    let fit = line_fit(&ts, &logs);
    let r2_algebraic = if ts.iter().all(|t| *t > 0.0) {
        let log_ts: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
        Some(line_fit(&log_ts, &logs).r2)
    } else {
        None
    };
    let slope_floor = -10.0 / t_end;
    let exponential = fit.r2 >= cfg.r2_threshold
        && fit.slope <= slope_floor
        && r2_algebraic.is_none_or(|alg| fit.r2 >= alg);
    Ok(exponential.then(|| ExponentialFit {
        gamma: fit.slope,
        r2: fit.r2,
        r2_algebraic,
        window: (ts[0], t_end),
        n_samples: n_tail,
    }))
}

/// Tail statistics of the rescaled radius y(t) = t^(1/(p-2)) r(t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateauStats {
    pub window: (f64, f64),
    pub n_samples: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// (max - min) / mean over the last decade.
    pub relative_oscillation: f64,
    /// y at the horizon over y one decade earlier.
    pub decade_growth: f64,
    /// y at the horizon over y three decades earlier.
    pub span_growth: f64,
    /// Whether y is nondecreasing across the last decade.
    pub monotone_growth: bool,
}

/// The decay-rate verdict on a single trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum RateVerdict {
    Exponential {
        gamma: f64,
    },
    /// Rescaled radius converges; the direction settles at a critical point
    /// with positive value.
    AlgebraicCase1 {
        beta: f64,
        theta_star: DVector<f64>,
        alpha0: f64,
    },
    /// Rescaled radius diverges; the direction accumulates on the
    /// zero-value critical set. No unique limit direction is claimed.
    AlgebraicCase2 {
        accumulation: Vec<DVector<f64>>,
        max_tail_distance: f64,
    },
    Inconclusive {
        reason: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub verdict: RateVerdict,
    pub plateau: Option<PlateauStats>,
    pub exponential: Option<ExponentialFit>,
    /// Order of the potential the rescaling used.
    pub p: u32,
}

/// Decides between the two algebraic decay branches from the polar series.
/// Callers must have ruled out exponential decay first.
pub fn dichotomy_verdict(
    polar: &PolarSeries,
    p: u32,
    catalog: &CriticalCatalog,
    cfg: &ClassifierConfig,
) -> Result<RateReport, ClassifyError> {
    if catalog.representatives().next().is_none() {
        return Err(ClassifyError::EmptyCatalog);
    }
    check_series(&polar.times, polar.r.len())?;
    let n = polar.times.len();
    if n < 2 {
        return Err(ClassifyError::TooFewSamples { need: 2, got: n });
    }
    let t_first = polar.times.iter().copied().find(|t| *t > 0.0);
    let t_end = polar.times[n - 1];
    let decades = match t_first {
        Some(t0) if t_end > t0 => (t_end / t0).log10(),
        _ => 0.0,
    };
    if decades < cfg.min_decades {
        return Err(ClassifyError::ShortSpan {
            need: cfg.min_decades,
            got: decades,
        });
    }

    let window_start = n - polar.times.iter().filter(|t| **t >= t_end / 10.0).count();
    let win_y = &polar.t_pow_r[window_start..];
    let win_t = &polar.times[window_start..];
    let mean = win_y.iter().sum::<f64>() / win_y.len() as f64;
    let min = win_y.iter().copied().fold(f64::INFINITY, f64::min);
    let max = win_y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let y_end = polar.t_pow_r[n - 1];
    let span_anchor = polar
        .times
        .iter()
        .position(|t| *t >= t_end / 1000.0)
        .unwrap_or(0);
    let plateau = PlateauStats {
        window: (win_t[0], t_end),
        n_samples: win_y.len(),
        mean,
        min,
        max,
        relative_oscillation: (max - min) / mean,
        decade_growth: y_end / win_y[0],
        span_growth: y_end / polar.t_pow_r[span_anchor],
        monotone_growth: win_y.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-3)),
    };

    let verdict = if plateau.relative_oscillation <= cfg.plateau_tol {
        let beta = mean;
        let theta_end = polar.theta.last().expect("nonempty");
        let (_, nearest) = catalog
            .nearest_angle(theta_end)
            .ok_or(ClassifyError::EmptyCatalog)?;
        let alpha0 = nearest.value;
        // the limit value and the plateau level determine each other
        let target = beta.powi(-(p as i32 - 2)) / (p as f64 * (p as f64 - 2.0));
        if (alpha0 - target).abs() <= cfg.value_tol * target.abs().max(f64::MIN_POSITIVE) {
            RateVerdict::AlgebraicCase1 {
                beta,
                theta_star: nearest.theta.clone(),
                alpha0,
            }
        } else {
            RateVerdict::Inconclusive {
                reason: format!(
                    "plateau at {beta:.6} predicts limit value {target:.6} but the nearest \
                     critical value is {alpha0:.6}"
                ),
            }
        }
    } else if plateau.monotone_growth && plateau.span_growth >= cfg.growth_factor {
        let zero_set = catalog.zero_value_points(cfg.zero_value_tol);
        if zero_set.is_empty() {
            RateVerdict::Inconclusive {
                reason: "rescaled radius grows but the catalog has no zero-value critical \
                         points to accumulate on"
                    .into(),
            }
        } else {
            let mut max_dist: f64 = 0.0;
            let mut nearest_dist = f64::INFINITY;
            for theta in &polar.theta[window_start..] {
                let d = zero_set
                    .iter()
                    .map(|c| angular_distance(&c.theta, theta))
                    .fold(f64::INFINITY, f64::min);
                max_dist = max_dist.max(d);
            }
            let theta_end = polar.theta.last().expect("nonempty");
            let dists: Vec<f64> = zero_set
                .iter()
                .map(|c| angular_distance(&c.theta, theta_end))
                .collect();
            for d in &dists {
                nearest_dist = nearest_dist.min(*d);
            }
            if max_dist <= cfg.dist_tol {
                let accumulation = zero_set
                    .iter()
                    .zip(&dists)
                    .filter(|(_, d)| **d <= nearest_dist + catalog.angular_tol)
                    .map(|(c, _)| c.theta.clone())
                    .collect();
                RateVerdict::AlgebraicCase2 {
                    accumulation,
                    max_tail_distance: max_dist,
                }
            } else {
                RateVerdict::Inconclusive {
                    reason: format!(
                        "rescaled radius grows but the direction stays {max_dist:.2e} from \
                         the zero-value critical set (tolerance {:.2e})",
                        cfg.dist_tol
                    ),
                }
            }
        }
    } else {
        RateVerdict::Inconclusive {
            reason: "no plateau and no sustained growth of the rescaled radius; extend the \
                     horizon"
                .into(),
        }
    };
    Ok(RateReport {
        verdict,
        plateau: Some(plateau),
        exponential: None,
        p,
    })
}

/// Full rate classification: exponential test first, dichotomy otherwise.
pub fn classify_rate(
    traj: &Trajectory,
    polar: &PolarSeries,
    p: u32,
    catalog: &CriticalCatalog,
    cfg: &ClassifierConfig,
) -> Result<RateReport, ClassifyError> {
    if let Some(fit) = detect_exponential(traj, cfg.tail_fraction, cfg)? {
        return Ok(RateReport {
            verdict: RateVerdict::Exponential { gamma: fit.gamma },
            plateau: None,
            exponential: Some(fit),
            p,
        });
    }
    dichotomy_verdict(polar, p, catalog, cfg)
}

/// Which mode group controls the decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MzVerdict {
    NeutralDominant,
    StableDominant,
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MzReport {
    pub verdict: MzVerdict,
    pub times: Vec<f64>,
    /// (X+ + X-) / X0 per sample.
    pub neutral_ratio: Vec<f64>,
    /// (X+ + X0) / X- per sample.
    pub stable_ratio: Vec<f64>,
    pub window: (f64, f64),
    /// Outcome of the weighted-total boundedness check, when it ran.
    pub bounded: Option<bool>,
}

/// Dominance comparison of the growing/neutral/decaying mode magnitudes.
/// The gap b is the spectral separation of the stable block; it enters the
/// exponential boundedness cross-check of the stable-dominant alternative.
pub fn merle_zaag_classify(
    times: &[f64],
    x_plus: &[f64],
    x_zero: &[f64],
    x_minus: &[f64],
    b: f64,
    cfg: &ClassifierConfig,
) -> Result<MzReport, ClassifyError> {
    check_series(times, x_plus.len())?;
    if x_zero.len() != x_plus.len() {
        return Err(ClassifyError::LengthMismatch(x_plus.len(), x_zero.len()));
    }
    if x_minus.len() != x_plus.len() {
        return Err(ClassifyError::LengthMismatch(x_plus.len(), x_minus.len()));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(ClassifyError::BadGap(b));
    }
    let n = times.len();
    for i in 0..n {
        let positive = x_plus[i] + x_zero[i] + x_minus[i] > 0.0;
        if !positive {
            return Err(ClassifyError::NonPositiveSeries(i));
        }
    }
    let neutral_ratio: Vec<f64> = (0..n).map(|i| (x_plus[i] + x_minus[i]) / x_zero[i]).collect();
    let stable_ratio: Vec<f64> = (0..n).map(|i| (x_plus[i] + x_zero[i]) / x_minus[i]).collect();

    let n_tail = ((n as f64 * cfg.tail_fraction).ceil() as usize).clamp(1, n);
    if n_tail < 4 {
        return Err(ClassifyError::TooFewSamples {
            need: 4,
            got: n_tail,
        });
    }
    let w0 = n - n_tail;
    let window = (times[w0], times[n - 1]);

    let tends_below = |ratio: &[f64]| -> bool {
        let first = ratio[w0];
        let last = ratio[n - 1];
        last.is_finite() && last <= cfg.ratio_tol && last <= first
    };

    let mut bounded = None;
    let verdict = if tends_below(&neutral_ratio) {
        MzVerdict::NeutralDominant
    } else if tends_below(&stable_ratio) {
        // the stable alternative also pins the total's decay rate near b
        let delta = cfg.mz_delta_fraction * b;
        let weighted = |i: usize| {
            ((b - delta) * times[i]).exp() * (x_plus[i] + x_zero[i] + x_minus[i])
        };
        let base = weighted(w0);
        let max = (w0..n).map(weighted).fold(0.0_f64, f64::max);
        let ok = max <= cfg.mz_bound_factor * base;
        bounded = Some(ok);
        if ok {
            MzVerdict::StableDominant
        } else {
            MzVerdict::Undetermined
        }
    } else {
        MzVerdict::Undetermined
    };
    Ok(MzReport {
        verdict,
        times: times.to_vec(),
        neutral_ratio,
        stable_ratio,
        window,
        bounded,
    })
}

/// Which fast-decay regime an exponentially decaying phase trajectory is in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum FastDecayCase {
    /// Pure rate from the hyperbolic menu; direction from tail
    /// normalization.
    Simple {
        rate: f64,
        direction: DVector<f64>,
    },
    /// Resonant pair: the state grows linearly under the exponential
    /// envelope, u ~ coefficient * t * e^(mt/2).
    ResonantGrowth {
        rate: f64,
        coefficient: f64,
    },
    /// Rotating pair: envelope rate m/2 with a persistent oscillation at a
    /// spectral frequency.
    Oscillatory {
        rate: f64,
        frequency: f64,
        matched_beta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FastDecayReport {
    /// The measured rate that was matched.
    pub gamma_star: f64,
    /// The spectral rate menu it was matched against.
    pub candidates: Vec<f64>,
    pub case: FastDecayCase,
}

/// Matches a fitted exponential rate against the spectral rate menu of an
/// elliptic run and discriminates the borderline envelope cases.
pub fn fast_decay_case(
    run: &EllipticRun,
    gamma_star: f64,
    cfg: &ClassifierConfig,
) -> Result<FastDecayReport, ClassifyError> {
    let candidates = run.spectral.candidate_rates();
    let matched = candidates
        .iter()
        .copied()
        .min_by(|a, b| (a - gamma_star).abs().total_cmp(&(b - gamma_star).abs()))
        .ok_or(ClassifyError::NoRateMatch {
            rate: gamma_star,
            tol: cfg.rate_tol,
        })?;
    if (matched - gamma_star).abs() > cfg.rate_tol * matched.abs().max(1.0) {
        return Err(ClassifyError::NoRateMatch {
            rate: gamma_star,
            tol: cfg.rate_tol,
        });
    }
    let m = run.spectral.m();
    let nd = run.spectral.dim();
    let traj = &run.trajectory;
    let n_samples = traj.times.len();
    let n_tail = ((n_samples as f64 * cfg.tail_fraction).ceil() as usize).clamp(1, n_samples);
    if n_tail < 4 {
        return Err(ClassifyError::TooFewSamples {
            need: 4,
            got: n_tail,
        });
    }
    let w0 = n_samples - n_tail;
    let u_norm = |k: usize| traj.states[k].rows(0, nd).norm();

    let has = |class: ModeClass| run.spectral.classes().contains(&class);
    let at_envelope = (matched - m / 2.0).abs() <= 1e-12
        && m < 0.0
        && (has(ModeClass::Resonant) || has(ModeClass::Rotating));

    if at_envelope {
        if has(ModeClass::Resonant) {
            // linear-in-t growth under the envelope marks the resonant case
            let vals: Vec<f64> = (w0..n_samples)
                .filter(|k| traj.times[*k] > 0.0)
                .map(|k| u_norm(k) * (-m / 2.0 * traj.times[k]).exp() / traj.times[k])
                .collect();
            if vals.len() >= 4 {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if mean > 0.0 && (max - min) / mean <= cfg.plateau_tol {
                    return Ok(FastDecayReport {
                        gamma_star,
                        candidates,
                        case: FastDecayCase::ResonantGrowth {
                            rate: matched,
                            coefficient: mean,
                        },
                    });
                }
            }
        }
        if has(ModeClass::Rotating)
            && let Some(case) = oscillation_fit(run, w0, cfg)?
        {
            return Ok(FastDecayReport {
                gamma_star,
                candidates,
                case,
            });
        }
    }

    // plain rate: report the tail direction of the u block
    let last_usable = (0..n_samples)
        .rev()
        .find(|k| u_norm(*k) > 0.0)
        .ok_or(ClassifyError::AllBelowFloor)?;
    let u = traj.states[last_usable].rows(0, nd).clone_owned();
    let direction = &u / u.norm();
    Ok(FastDecayReport {
        gamma_star,
        candidates,
        case: FastDecayCase::Simple {
            rate: matched,
            direction,
        },
    })
}

// Fits the rotation frequency of the dominant rotating pair by unwrapping
// the phase of its coefficient pair over the tail window.
fn oscillation_fit(
    run: &EllipticRun,
    w0: usize,
    cfg: &ClassifierConfig,
) -> Result<Option<FastDecayCase>, ClassifyError> {
    let m = run.spectral.m();
    // dominant rotating index by tail amplitude
    let mut best: Option<(usize, f64)> = None;
    for (i, class) in run.spectral.classes().iter().enumerate() {
        if *class != ModeClass::Rotating {
            continue;
        }
        let amp = pair_amplitude(run, i, run.coefficients.len() - 1);
        if best.is_none_or(|(_, a)| amp > a) {
            best = Some((i, amp));
        }
    }
    let Some((idx, amp)) = best else {
        return Ok(None);
    };
    if amp == 0.0 {
        return Ok(None);
    }
    let mut phases = Vec::new();
    let mut times = Vec::new();
    let mut prev: Option<f64> = None;
    let mut offset = 0.0;
    for k in w0..run.coefficients.len() {
        let (xi1, xi2) = pair_coefficients(run, idx, k);
        if xi1 == 0.0 && xi2 == 0.0 {
            continue;
        }
        let raw = xi2.atan2(xi1);
        // unwrap: sampling must be dense enough that steps stay under pi
        if let Some(p) = prev {
            let mut d = raw + offset - p;
            while d > std::f64::consts::PI {
                offset -= 2.0 * std::f64::consts::PI;
                d -= 2.0 * std::f64::consts::PI;
            }
            while d < -std::f64::consts::PI {
                offset += 2.0 * std::f64::consts::PI;
                d += 2.0 * std::f64::consts::PI;
            }
        }
        let unwrapped = raw + offset;
        prev = Some(unwrapped);
        phases.push(unwrapped);
        times.push(run.trajectory.times[k]);
    }
    if phases.len() < 4 {
        return Ok(None);
    }
    let fit = line_fit(&times, &phases);
    let frequency = fit.slope.abs();
    let beta = run
        .spectral
        .beta(idx)
        .expect("rotating index has a frequency");
    if (frequency - beta).abs() <= cfg.freq_tol * beta.max(1.0) {
        Ok(Some(FastDecayCase::Oscillatory {
            rate: m / 2.0,
            frequency,
            matched_beta: beta,
        }))
    } else {
        Err(ClassifyError::NoRateMatch {
            rate: frequency,
            tol: cfg.freq_tol,
        })
    }
}

fn pair_coefficients(run: &EllipticRun, index: usize, sample: usize) -> (f64, f64) {
    let coeffs = &run.coefficients[sample];
    let mut xi1 = 0.0;
    let mut xi2 = 0.0;
    for (label, value) in &coeffs.entries {
        match label {
            ModeLabel::Rot1(i) if *i == index => xi1 = *value,
            ModeLabel::Rot2(i) if *i == index => xi2 = *value,
            _ => {}
        }
    }
    (xi1, xi2)
}

fn pair_amplitude(run: &EllipticRun, index: usize, sample: usize) -> f64 {
    let (xi1, xi2) = pair_coefficients(run, index, sample);
    xi1.hypot(xi2)
}

/// Which reduced dynamics the residual is tested against.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum ResidualMode {
    /// x' + grad f(x).
    Parabolic,
    /// x' + (1/m) grad f(x).
    Elliptic { m: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    pub times: Vec<f64>,
    /// |x' + c grad f(x)| per sample.
    pub residuals: Vec<f64>,
    /// Residual over |x|^(p - eps/2) per sample.
    pub ratios: Vec<f64>,
    /// Sup of the ratio over the last decade.
    pub sup_ratio: f64,
    /// Per trailing decade (window upper end, sup of ratio), ascending.
    pub decade_sups: Vec<(f64, f64)>,
    pub eps: f64,
    pub exponent: f64,
    /// Set when eps leaves the validated range (0, 1/2].
    pub eps_flagged: bool,
    /// True when the series was cut at the magnitude floor.
    pub truncated: bool,
}

/// Residual of the reduced dynamics along sampled kernel coordinates:
/// derivative by centered nonuniform differences on the output grid, bound
/// exponent p - eps/2. A bounded, decade-wise nonincreasing sup is the
/// testable form of the reduction error estimates.
pub fn neutral_mode_residual(
    times: &[f64],
    kernel_coords: &[DVector<f64>],
    reduced: &ReducedFunctional,
    mode: ResidualMode,
    eps: f64,
    cfg: &ClassifierConfig,
) -> Result<ResidualReport, ClassifyError> {
    check_series(times, kernel_coords.len())?;
    if !(eps > 0.0 && eps < 2.0) {
        return Err(ClassifyError::BadExponent(eps));
    }
    let factor = match mode {
        ResidualMode::Parabolic => 1.0,
        ResidualMode::Elliptic { m } => {
            if m == 0.0 || !m.is_finite() {
                return Err(ClassifyError::Spectral(crate::error::SpectralError::ZeroM));
            }
            1.0 / m
        }
    };
    // truncate at the floor like the polar series does
    let cut = kernel_coords
        .iter()
        .position(|x| x.norm() < cfg.floor_tol)
        .unwrap_or(kernel_coords.len());
    if cut == 0 {
        return Err(ClassifyError::AllBelowFloor);
    }
    let truncated = cut < kernel_coords.len();
    let times = &times[..cut];
    let xs = &kernel_coords[..cut];
    let hw = cfg.fd_half_width.max(1);
    let width = 2 * hw + 1;
    if cut < width {
        return Err(ClassifyError::TooFewSamples {
            need: width,
            got: cut,
        });
    }
    let grad = reduced.f.gradient_polys();
    let exponent = reduced.p as f64 - eps / 2.0;
    let dim = reduced.f.dim();
    let mut residuals = Vec::with_capacity(cut);
    let mut ratios = Vec::with_capacity(cut);
    for k in 0..cut {
        let lo = k.saturating_sub(hw).min(cut - width);
        let nodes = &times[lo..lo + width];
        let w = fd_weights(times[k], nodes, 1);
        let mut dx = DVector::zeros(dim);
        for (j, wj) in w[1].iter().enumerate() {
            dx.axpy(*wj, &xs[lo + j], 1.0);
        }
        let g = DVector::from_iterator(
            dim,
            grad.iter().map(|gi| gi.evaluate(xs[k].as_slice())),
        );
        let residual = (dx + g * factor).norm();
        residuals.push(residual);
        ratios.push(residual / xs[k].norm().powf(exponent));
    }
    let t_end = times[cut - 1];
    let mut decade_sups: Vec<(f64, f64)> = Vec::new();
    let mut hi = t_end;
    loop {
        let lo = hi / 10.0;
        let sup = times
            .iter()
            .zip(&ratios)
            .filter(|(t, _)| **t > lo && **t <= hi)
            .map(|(_, r)| *r)
            .fold(f64::NEG_INFINITY, f64::max);
        if sup.is_finite() {
            decade_sups.push((hi, sup));
        }
        hi = lo;
        if hi < times[0].max(f64::MIN_POSITIVE) {
            break;
        }
    }
    decade_sups.reverse();
    let sup_ratio = decade_sups.last().map_or(f64::NAN, |(_, s)| *s);
    Ok(ResidualReport {
        times: times.to_vec(),
        residuals,
        ratios,
        sup_ratio,
        decade_sups,
        eps,
        exponent,
        eps_flagged: !(eps > 0.0 && eps <= 0.5),
        truncated,
    })
}

/// Kernel coordinates of every sample of a parabolic run, via the manifold
/// decomposition of the full state.
pub fn parabolic_kernel_coords(
    model: &ModelSystem,
    run: &ParabolicRun,
) -> Result<Vec<DVector<f64>>, ClassifyError> {
    run.trajectory
        .states
        .iter()
        .map(|u| {
            let d = reduction::decompose_state(model, u, reduction::CORRECTOR_TOL)?;
            Ok(d.x)
        })
        .collect()
}

/// Kernel coordinates of every sample of an elliptic run, from the neutral
/// coefficients of the phase projection.
pub fn elliptic_kernel_coords(run: &EllipticRun) -> Vec<DVector<f64>> {
    run.coefficients
        .iter()
        .map(|c| DVector::from_row_slice(&c.z))
        .collect()
}

/// Great-circle length bookkeeping of the direction curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArcLength {
    pub total: f64,
    pub times: Vec<f64>,
    /// Length accrued strictly after each sample.
    pub remaining: Vec<f64>,
    /// False when the tail still carries a non-negligible share of the
    /// length, the signature of a non-convergent direction.
    pub converging: bool,
}

impl ArcLength {
    /// Length accrued after time tau.
    pub fn remaining_after(&self, tau: f64) -> f64 {
        match self.times.iter().rposition(|t| *t <= tau) {
            Some(i) => self.remaining[i],
            None => self.total,
        }
    }
}

/// Recomputes the cumulative secant arc length of the direction curve and
/// its tail profile. Independent of the running sum the polar series
/// carries, so the two cross-check each other.
pub fn secant_arclength(polar: &PolarSeries) -> ArcLength {
    let n = polar.theta.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = KahanSum::default();
    cumulative.push(0.0);
    for w in polar.theta.windows(2) {
        let chord = (&w[1] - &w[0]).norm();
        acc.add(2.0 * (chord / 2.0).min(1.0).asin());
        cumulative.push(acc.value());
    }
    let total = cumulative.last().copied().unwrap_or(0.0);
    let remaining: Vec<f64> = cumulative.iter().map(|c| total - c).collect();
    let converging = if total == 0.0 || n < 2 {
        true
    } else {
        let t_end = polar.times[n - 1];
        let tail = match polar.times.iter().rposition(|t| *t <= t_end / 10.0) {
            Some(i) => remaining[i],
            None => total,
        };
        tail <= 0.05 * total
    };
    ArcLength {
        total,
        times: polar.times.clone(),
        remaining,
        converging,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::{gradient_flow, parabolic_flow, IntegratorConfig};
    use crate::potential::Polynomial;
    use crate::reduction::reduced_functional;
    use crate::sphere::find_critical_points;

    fn cfg() -> ClassifierConfig {
        ClassifierConfig::default()
    }

    fn run_cfg(t_end: f64, ratio: f64) -> IntegratorConfig {
        IntegratorConfig {
            t_end,
            out_ratio: ratio,
            ..Default::default()
        }
    }

    fn worked_model() -> ModelSystem {
        let f = Polynomial::from_terms(
            2,
            [(0.5, vec![0, 2]), (1.0, vec![2, 1]), (1.0, vec![4, 0])],
        )
        .unwrap();
        ModelSystem::new(f).unwrap()
    }

    #[test]
    fn synthetic_exponential_is_fit_exactly() {
        // stay above the magnitude floor across the whole grid
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let mags: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let fit = detect_exponential_series(&times, &mags, 0.25, &cfg())
            .unwrap()
            .expect("exponential");
        assert!((fit.gamma + 2.0).abs() < 1e-12);
        assert!(fit.r2 > 0.999999);
    }

    #[test]
    fn linear_parabolic_rate_is_detected() {
        let f = Polynomial::from_terms(2, [(0.5, vec![2, 0]), (1.5, vec![0, 2])]).unwrap();
        let model = ModelSystem::new(f).unwrap();
        let u0 = DVector::from_row_slice(&[0.5, 0.5]);
        let run = parabolic_flow(&model, None, &u0, &run_cfg(15.0, 1.02)).unwrap();
        let fit = detect_exponential(&run.trajectory, 0.25, &cfg())
            .unwrap()
            .expect("exponential");
        assert!((fit.gamma + 1.0).abs() < 1e-3, "gamma {}", fit.gamma);
    }

    #[test]
    fn algebraic_decay_is_not_called_exponential() {
        let f = Polynomial::from_terms(1, [(1.0, vec![4])]).unwrap();
        let z0 = DVector::from_row_slice(&[0.3]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(1e4, 1.05)).unwrap();
        let fit = detect_exponential(&traj, 0.25, &cfg()).unwrap();
        assert!(fit.is_none());
    }

    #[test]
    fn short_tails_are_rejected() {
        let times: Vec<f64> = (0..=20).map(|k| k as f64).collect();
        let mags: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let err = detect_exponential_series(&times, &mags, 0.25, &cfg()).unwrap_err();
        assert!(matches!(err, ClassifyError::TooFewSamples { .. }));
    }

    #[test]
    fn axis_trajectory_lands_in_case_one() {
        let f = Polynomial::from_terms(2, [(1.0, vec![4, 0]), (1.0, vec![0, 8])]).unwrap();
        let f4 = f.homogeneous_part(4);
        let catalog = find_critical_points(&f4, 64, 11, 1e-10).unwrap();
        let z0 = DVector::from_row_slice(&[0.3, 0.0]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(1e6, 1.05)).unwrap();
        let polar = crate::integrate::polar_track(&traj, 4, &f4, 1e-9).unwrap();
        let report = classify_rate(&traj, &polar, 4, &catalog, &cfg()).unwrap();
        match &report.verdict {
            RateVerdict::AlgebraicCase1 {
                beta,
                theta_star,
                alpha0,
            } => {
                let want = 8f64.powf(-0.5);
                assert!((beta - want).abs() < 0.02 * want, "beta {beta}");
                assert!((alpha0 - 1.0).abs() < 0.02);
                assert!(theta_star[0].abs() > 0.999);
            }
            other => panic!("expected case 1, got {other:?}"),
        }
    }

    #[test]
    fn invariant_axis_start_lands_in_case_two() {
        let f = Polynomial::from_terms(2, [(1.0, vec![4, 0]), (1.0, vec![0, 8])]).unwrap();
        let f4 = f.homogeneous_part(4);
        let catalog = find_critical_points(&f4, 64, 11, 1e-10).unwrap();
        // start on the invariant slow axis where the order-4 part vanishes
        let z0 = DVector::from_row_slice(&[0.0, 0.4]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(1e6, 1.05)).unwrap();
        let polar = crate::integrate::polar_track(&traj, 4, &f4, 1e-9).unwrap();
        let report = classify_rate(&traj, &polar, 4, &catalog, &cfg()).unwrap();
        match &report.verdict {
            RateVerdict::AlgebraicCase2 {
                accumulation,
                max_tail_distance,
            } => {
                assert!(*max_tail_distance <= 1e-3);
                assert!(!accumulation.is_empty());
                for theta in accumulation {
                    assert!(theta[0].abs() < 1e-3 && theta[1].abs() > 0.999);
                }
            }
            other => panic!("expected case 2, got {other:?}"),
        }
        let y_end = polar.t_pow_r.last().unwrap();
        assert!(*y_end > 50.0, "rescaled radius {y_end}");
    }

    #[test]
    fn mixed_quartic_reaches_the_diagonal_value() {
        let f = Polynomial::from_terms(
            2,
            [(1.0, vec![4, 0]), (1.0, vec![2, 2]), (1.0, vec![0, 4])],
        )
        .unwrap();
        let catalog = find_critical_points(&f, 64, 11, 1e-10).unwrap();
        let z0 = DVector::from_row_slice(&[0.3, 0.2]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(1e6, 1.05)).unwrap();
        let polar = crate::integrate::polar_track(&traj, 4, &f, 1e-9).unwrap();
        let report = dichotomy_verdict(&polar, 4, &catalog, &cfg()).unwrap();
        match &report.verdict {
            RateVerdict::AlgebraicCase1 {
                beta,
                theta_star,
                alpha0,
            } => {
                let want = 6f64.powf(-0.5);
                assert!((beta - want).abs() < 0.02 * want, "beta {beta}");
                assert!((alpha0 - 0.75).abs() < 0.01);
                let d = std::f64::consts::FRAC_1_SQRT_2;
                assert!((theta_star[0].abs() - d).abs() < 1e-6);
                assert!((theta_star[1].abs() - d).abs() < 1e-6);
            }
            other => panic!("expected case 1, got {other:?}"),
        }
    }

    #[test]
    fn short_span_is_rejected() {
        let f = Polynomial::from_terms(2, [(1.0, vec![4, 0]), (1.0, vec![0, 8])]).unwrap();
        let f4 = f.homogeneous_part(4);
        let catalog = find_critical_points(&f4, 16, 11, 1e-10).unwrap();
        let z0 = DVector::from_row_slice(&[0.3, 0.0]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(5.0, 1.05)).unwrap();
        let polar = crate::integrate::polar_track(&traj, 4, &f4, 1e-9).unwrap();
        let err = dichotomy_verdict(&polar, 4, &catalog, &cfg()).unwrap_err();
        assert!(matches!(err, ClassifyError::ShortSpan { .. }));
    }

    #[test]
    fn neutral_dominance_is_recognized() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let xp: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let x0: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let xm: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let report = merle_zaag_classify(&times, &xp, &x0, &xm, 1.0, &cfg()).unwrap();
        assert_eq!(report.verdict, MzVerdict::NeutralDominant);
    }

    #[test]
    fn stable_dominance_is_recognized_and_scale_invariant() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let xp: Vec<f64> = times.iter().map(|t| (-3.0 * t).exp()).collect();
        let x0: Vec<f64> = times.iter().map(|t| (-2.0 * t).exp()).collect();
        let xm: Vec<f64> = times.iter().map(|t| (-t).exp()).collect();
        let report = merle_zaag_classify(&times, &xp, &x0, &xm, 1.0, &cfg()).unwrap();
        assert_eq!(report.verdict, MzVerdict::StableDominant);
        assert_eq!(report.bounded, Some(true));
        let scale = |v: &[f64]| v.iter().map(|x| 7.3 * x).collect::<Vec<_>>();
        let scaled =
            merle_zaag_classify(&times, &scale(&xp), &scale(&x0), &scale(&xm), 1.0, &cfg())
                .unwrap();
        assert_eq!(scaled.verdict, MzVerdict::StableDominant);
    }

    #[test]
    fn balanced_series_stay_undetermined() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.1).collect();
        let x: Vec<f64> = times.iter().map(|t| 1.0 / (1.0 + t)).collect();
        let report = merle_zaag_classify(&times, &x, &x, &x, 1.0, &cfg()).unwrap();
        assert_eq!(report.verdict, MzVerdict::Undetermined);
    }

    #[test]
    fn residual_ratio_of_exact_reduced_flow_is_tiny() {
        let model = worked_model();
        let reduced = reduced_functional(&model, None, None, None).unwrap();
        // feed the reduced flow itself through the residual check
        let traj = gradient_flow(
            &reduced.f,
            None,
            &DVector::from_row_slice(&[0.2]),
            &run_cfg(1e4, 1.02),
        )
        .unwrap();
        let report = neutral_mode_residual(
            &traj.times,
            &traj.states,
            &reduced,
            ResidualMode::Parabolic,
            0.5,
            &cfg(),
        )
        .unwrap();
        assert!(report.sup_ratio < 1e-4, "sup {}", report.sup_ratio);
        assert!(!report.eps_flagged);
    }

    #[test]
    fn parabolic_residual_sups_decay_by_decade() {
        let model = worked_model();
        let reduced = reduced_functional(&model, None, None, None).unwrap();
        let u0 = DVector::from_row_slice(&[0.2, -0.04]);
        let run = parabolic_flow(&model, None, &u0, &run_cfg(1e4, 1.02)).unwrap();
        let xs = parabolic_kernel_coords(&model, &run).unwrap();
        let report = neutral_mode_residual(
            &run.trajectory.times,
            &xs,
            &reduced,
            ResidualMode::Parabolic,
            0.5,
            &cfg(),
        )
        .unwrap();
        let k = report.decade_sups.len();
        assert!(k >= 3, "need three decades, got {k}");
        let tail = &report.decade_sups[k - 3..];
        assert!(
            tail[0].1 > tail[1].1 && tail[1].1 > tail[2].1,
            "sups {tail:?}"
        );
        assert!(report.sup_ratio.is_finite());
    }

    #[test]
    fn out_of_range_exponent_is_flagged() {
        let model = worked_model();
        let reduced = reduced_functional(&model, None, None, None).unwrap();
        let traj = gradient_flow(
            &reduced.f,
            None,
            &DVector::from_row_slice(&[0.2]),
            &run_cfg(100.0, 1.05),
        )
        .unwrap();
        let report = neutral_mode_residual(
            &traj.times,
            &traj.states,
            &reduced,
            ResidualMode::Parabolic,
            1.9,
            &cfg(),
        )
        .unwrap();
        assert!(report.eps_flagged);
        let err = neutral_mode_residual(
            &traj.times,
            &traj.states,
            &reduced,
            ResidualMode::Parabolic,
            2.5,
            &cfg(),
        )
        .unwrap_err();
        assert!(matches!(err, ClassifyError::BadExponent(_)));
    }

    #[test]
    fn hyperbolic_branch_matches_its_characteristic_root() {
        // u'' + 4u' + 3u = 0: both roots negative, so the horizon is not
        // limited by unstable contamination; generic data decays at -1
        let f = Polynomial::from_terms(1, [(-1.5, vec![2])]).unwrap();
        let model = ModelSystem::new(f).unwrap();
        assert_eq!(model.eigenvalues(), &[3.0]);
        let run = crate::integrate::elliptic_flow(
            &model,
            -4.0,
            &DVector::from_row_slice(&[1.0]),
            &DVector::from_row_slice(&[0.0]),
            None,
            &run_cfg(15.0, 1.01),
        )
        .unwrap();
        let fit = detect_exponential_series(
            &run.trajectory.times,
            &run.gram_norms,
            0.25,
            &cfg(),
        )
        .unwrap()
        .expect("exponential");
        assert!((fit.gamma + 1.0).abs() < 1e-3, "gamma {}", fit.gamma);
        let report = fast_decay_case(&run, fit.gamma, &cfg()).unwrap();
        match &report.case {
            FastDecayCase::Simple { rate, direction } => {
                assert!((rate + 1.0).abs() < 1e-12);
                assert!((direction[0].abs() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected the plain case, got {other:?}"),
        }
    }

    #[test]
    fn resonant_pair_shows_linear_envelope_growth() {
        // u'' + 2u' + u = 0 from rest-with-kick gives u = t e^(-t)
        let f = Polynomial::from_terms(1, [(-0.5, vec![2])]).unwrap();
        let model = ModelSystem::new(f).unwrap();
        let run = crate::integrate::elliptic_flow(
            &model,
            -2.0,
            &DVector::from_row_slice(&[0.0]),
            &DVector::from_row_slice(&[1.0]),
            None,
            &run_cfg(20.0, 1.01),
        )
        .unwrap();
        let fit = detect_exponential_series(
            &run.trajectory.times,
            &run.gram_norms,
            0.25,
            &cfg(),
        )
        .unwrap()
        .expect("exponential");
        // the t factor biases the fitted slope by roughly 1/t
        assert!((fit.gamma + 1.0).abs() < 0.1, "gamma {}", fit.gamma);
        let report = fast_decay_case(&run, fit.gamma, &cfg()).unwrap();
        match &report.case {
            FastDecayCase::ResonantGrowth { rate, coefficient } => {
                assert!((rate + 1.0).abs() < 1e-12);
                assert!((coefficient - 1.0).abs() < 0.01, "c {coefficient}");
            }
            other => panic!("expected resonant growth, got {other:?}"),
        }
    }

    #[test]
    fn rotating_pair_yields_envelope_and_frequency() {
        // u'' + 2u' + 2u = 0 gives u = e^(-t) cos t; the adapted norm is the
        // exact envelope, free of the oscillation
        let f = Polynomial::from_terms(1, [(-1.0, vec![2])]).unwrap();
        let model = ModelSystem::new(f).unwrap();
        assert_eq!(model.eigenvalues(), &[2.0]);
        let run = crate::integrate::elliptic_flow(
            &model,
            -2.0,
            &DVector::from_row_slice(&[1.0]),
            &DVector::from_row_slice(&[-1.0]),
            None,
            &run_cfg(15.0, 1.01),
        )
        .unwrap();
        let fit = detect_exponential_series(
            &run.trajectory.times,
            &run.gram_norms,
            0.25,
            &cfg(),
        )
        .unwrap()
        .expect("exponential");
        assert!((fit.gamma + 1.0).abs() < 1e-6, "gamma {}", fit.gamma);
        let report = fast_decay_case(&run, fit.gamma, &cfg()).unwrap();
        match &report.case {
            FastDecayCase::Oscillatory {
                rate,
                frequency,
                matched_beta,
            } => {
                assert!((rate + 1.0).abs() < 1e-12);
                assert!((frequency - 1.0).abs() < 0.02, "freq {frequency}");
                assert!((matched_beta - 1.0).abs() < 1e-12);
            }
            other => panic!("expected the oscillatory case, got {other:?}"),
        }
    }

    #[test]
    fn unmatched_rate_is_a_model_mismatch() {
        let f = Polynomial::from_terms(1, [(1.5, vec![2])]).unwrap();
        let model = ModelSystem::new(f).unwrap();
        let run = crate::integrate::elliptic_flow(
            &model,
            2.0,
            &DVector::from_row_slice(&[1.0]),
            &DVector::from_row_slice(&[-1.0]),
            None,
            &run_cfg(10.0, 1.02),
        )
        .unwrap();
        let err = fast_decay_case(&run, -0.4, &cfg()).unwrap_err();
        assert!(matches!(err, ClassifyError::NoRateMatch { .. }));
    }

    #[test]
    fn radial_run_has_zero_arclength() {
        let f = Polynomial::from_terms(2, [(1.0, vec![4, 0])]).unwrap();
        let z0 = DVector::from_row_slice(&[0.3, 0.0]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(1e4, 1.05)).unwrap();
        let polar = crate::integrate::polar_track(&traj, 4, &f, 1e-9).unwrap();
        let arc = secant_arclength(&polar);
        assert!(arc.total < 1e-8);
        assert!(arc.converging);
    }

    #[test]
    fn diagonal_run_arclength_matches_the_angular_gap() {
        let f = Polynomial::from_terms(
            2,
            [(1.0, vec![4, 0]), (1.0, vec![2, 2]), (1.0, vec![0, 4])],
        )
        .unwrap();
        let z0 = DVector::from_row_slice(&[0.3, 0.2]);
        let traj = gradient_flow(&f, None, &z0, &run_cfg(1e6, 1.05)).unwrap();
        let polar = crate::integrate::polar_track(&traj, 4, &f, 1e-9).unwrap();
        let arc = secant_arclength(&polar);
        let want = (std::f64::consts::FRAC_PI_4 - (2.0f64 / 3.0).atan()).abs();
        assert!((arc.total - want).abs() < 5e-3, "total {}", arc.total);
        assert!(arc.converging);
        // direction converges like t^(-1/3); the last decade carries only a
        // few percent of the length
        assert!(arc.remaining_after(1e5) < 5e-3);
        // agrees with the running sum the polar series keeps
        assert!((arc.total - polar.arc_length.last().unwrap()).abs() < 1e-9);
    }

    #[test]
    fn log_spiral_is_flagged_nonconvergent() {
        let mut times = Vec::new();
        let mut theta = Vec::new();
        let mut t = 1.0_f64;
        while t < 1e6 {
            let phi = (1.0 + t).ln();
            times.push(t);
            theta.push(DVector::from_row_slice(&[phi.cos(), phi.sin()]));
            t *= 1.05;
        }
        let n = times.len();
        let polar = PolarSeries {
            times,
            r: vec![1.0; n],
            theta,
            fhat: vec![0.0; n],
            grad_fhat_norm: vec![0.0; n],
            arc_length: vec![0.0; n],
            t_pow_r: vec![1.0; n],
            truncated: false,
        };
        let arc = secant_arclength(&polar);
        assert!(arc.total > 10.0);
        assert!(!arc.converging);
    }
}
