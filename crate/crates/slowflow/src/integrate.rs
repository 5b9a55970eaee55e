//! Long-horizon integration of the three model dynamics: the perturbed
//! gradient flow, the parabolic system on a model potential, and the
//! second-order elliptic system in its phase-space form. Also provides
//! the polar decomposition of a decaying trajectory and a slow-manifold
//! integrator for the elliptic kernel dynamics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::IntegrateError;
use crate::numeric::{rng_from_seed, standard_normal, unit_vector, KahanSum};
use crate::ode::{self, SolveParams};
use crate::potential::Polynomial;
use crate::reduction::{self, ModelSystem};
use crate::spectral::{
    basis_psi, gram_norm, project_coefficients, Coefficients, PhaseVector, PsiBasis,
    SpectralSystem,
};

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Reached the configured horizon.
    Horizon,
    /// State norm fell below the floor tolerance.
    Floor,
    /// Step size collapsed or the step budget ran out.
    StepFailure,
    /// State norm grew past the escape factor times its initial size.
    Escaped,
}

/// Coordinate chart for the gradient flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Cartesian,
    /// Inverse-power radial variable with the angular direction; benign
    /// near the origin where the cartesian field stiffens.
    SigmaTheta,
}

/// Tolerances, horizon, and output layout for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    /// Geometric spacing of output samples after the initial linear phase.
    pub out_ratio: f64,
    pub max_steps: u64,
    pub chart: Chart,
    /// Below this state norm the decay can no longer be resolved.
    pub floor_tol: f64,
    /// Growth beyond this multiple of the initial norm terminates the run.
    pub escape_factor: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-13,
            t_end: 1e6,
            out_ratio: 1.05,
            max_steps: 10_000_000,
            chart: Chart::Cartesian,
            floor_tol: 1e-9,
            escape_factor: 10.0,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite())
            || !(self.abs_tol > 0.0 && self.abs_tol.is_finite())
        {
            return Err(IntegrateError::BadTolerance {
                rel: self.rel_tol,
                abs: self.abs_tol,
            });
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(IntegrateError::BadHorizon {
                t0: 0.0,
                t_end: self.t_end,
            });
        }
        if !(self.out_ratio > 1.0 && self.out_ratio.is_finite()) {
            return Err(IntegrateError::BadSchedule(format!(
                "output ratio must exceed 1, got {}",
                self.out_ratio
            )));
        }
        if !(self.floor_tol >= 0.0 && self.escape_factor > 1.0) {
            return Err(IntegrateError::BadSchedule(format!(
                "floor {} / escape factor {} out of range",
                self.floor_tol, self.escape_factor
            )));
        }
        Ok(())
    }

    /// Output times: a short linear ramp, then geometric up to the horizon.
    pub fn output_times(&self) -> Vec<f64> {
        let t_lin = self.t_end.min(1.0);
        let mut out: Vec<f64> = (1..=8).map(|k| t_lin * k as f64 / 8.0).collect();
        let mut t = t_lin;
        loop {
            t *= self.out_ratio;
            if t >= self.t_end {
                break;
            }
            out.push(t);
        }
        if out.last().is_none_or(|l| *l < self.t_end) {
            out.push(self.t_end);
        }
        out
    }
}

/// Output samples of one run with per-sample integrator diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Step size in effect when the sample was produced.
    pub steps: Vec<f64>,
    /// Local error estimate of that step.
    pub errors: Vec<f64>,
    pub termination: Termination,
    pub n_accepted: u64,
    pub n_rejected: u64,
}

impl Trajectory {
    fn from_raw(raw: ode::RawTrajectory, map: impl Fn(&DVector<f64>) -> DVector<f64>) -> Self {
        Trajectory {
            times: raw.times,
            states: raw.states.iter().map(map).collect(),
            steps: raw.steps,
            errors: raw.errors,
            termination: raw.termination,
            n_accepted: raw.n_accepted,
            n_rejected: raw.n_rejected,
        }
    }

    // A run that never moves: the state is an equilibrium.
    fn constant(state: &DVector<f64>, out_times: &[f64]) -> Self {
        let mut times = vec![0.0];
        times.extend_from_slice(out_times);
        let n = times.len();
        Trajectory {
            times,
            states: vec![state.clone(); n],
            steps: vec![0.0; n],
            errors: vec![0.0; n],
            termination: Termination::Horizon,
            n_accepted: 0,
            n_rejected: 0,
        }
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has samples")
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("trajectory has samples")
    }
}

/// Direction of the state-dependent forcing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PerturbationDirection {
    /// A fixed unit vector.
    Fixed(DVector<f64>),
    /// A smooth seeded unit field, frozen by the seed.
    Seeded(u64),
}

/// Forcing G(z) = amplitude * |z|^(p - epsilon) * e(z) with |e| = 1, so the
/// envelope bound holds by construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    /// Exponent offset, must lie in (0, 1/2).
    pub epsilon: f64,
    pub direction: PerturbationDirection,
}

impl Perturbation {
    // Compile to a concrete field once the order p and dimension are known.
    fn build(
        &self,
        p: u32,
        dim: usize,
    ) -> Result<impl Fn(&DVector<f64>) -> DVector<f64> + use<>, IntegrateError> {
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(IntegrateError::BadEpsilon(self.epsilon));
        }
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(IntegrateError::BadAmplitude(self.amplitude));
        }
        let exponent = p as f64 - self.epsilon;
        let c = self.amplitude;
        let (anchor, mix) = match &self.direction {
            PerturbationDirection::Fixed(e) => {
                if e.len() != dim {
                    return Err(IntegrateError::DimensionMismatch {
                        expected: dim,
                        got: e.len(),
                    });
                }
                let norm = e.norm();
                if !(norm.is_finite() && norm > 0.0) {
                    return Err(IntegrateError::NonFiniteInitial);
                }
                (e / norm, DMatrix::zeros(dim, dim))
            }
            PerturbationDirection::Seeded(seed) => {
                let mut rng = rng_from_seed(*seed);
                let anchor = unit_vector(&mut rng, dim);
                let scale = 1.0 / (dim as f64).sqrt();
                let mix =
                    DMatrix::from_fn(dim, dim, |_, _| standard_normal(&mut rng) * scale);
                (anchor, mix)
            }
        };
        Ok(move |z: &DVector<f64>| {
            let r = z.norm();
            if r == 0.0 {
                return DVector::zeros(z.len());
            }
            let mut e = &anchor + &mix * z;
            let en = e.norm();
            if en < 1e-12 {
                e = anchor.clone();
            } else {
                e /= en;
            }
            e * (c * r.powf(exponent))
        })
    }
}

/// Multiplicative nonlinear perturbation: N(u) = prefactor(u) * M(u) with a
/// prefactor vanishing at the origin, so N vanishes at least quadratically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearPerturbation {
    prefactor: Polynomial,
}

impl NonlinearPerturbation {
    pub fn new(prefactor: Polynomial) -> Result<Self, IntegrateError> {
        if prefactor.terms().any(|(_, e)| e.iter().sum::<u32>() == 0) {
            return Err(IntegrateError::PerturbationConstantTerm);
        }
        Ok(NonlinearPerturbation { prefactor })
    }

    pub fn prefactor(&self) -> &Polynomial {
        &self.prefactor
    }
}

fn check_finite(y: &DVector<f64>) -> Result<(), IntegrateError> {
    if y.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(IntegrateError::NonFiniteInitial)
    }
}

/// Integrates z' = -grad f(z) + G(z) from z0. In the sigma-theta chart the
/// radial variable sigma = r^(2-p) and the unit direction are integrated
/// instead and mapped back to z for output.
pub fn gradient_flow(
    f: &Polynomial,
    perturbation: Option<&Perturbation>,
    z0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, IntegrateError> {
    cfg.validate()?;
    check_finite(z0)?;
    let dim = f.dim();
    if z0.len() != dim {
        return Err(IntegrateError::DimensionMismatch {
            expected: dim,
            got: z0.len(),
        });
    }
    let out_times = cfg.output_times();
    let r0 = z0.norm();
    if r0 == 0.0 {
        return Ok(Trajectory::constant(z0, &out_times));
    }

    // the forcing (and the sigma chart) need the order of integrability
    let leading = if perturbation.is_some() || cfg.chart == Chart::SigmaTheta {
        Some(f.order_of_integrability(1e-10)?)
    } else {
        None
    };
    let forcing = perturbation
        .map(|g| g.build(leading.as_ref().expect("leading computed").degree, dim))
        .transpose()?;
    let grad = f.gradient_polys();

    let params = SolveParams {
        t0: 0.0,
        out_times: &out_times,
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_steps: cfg.max_steps,
    };
    let floor = cfg.floor_tol;
    let escape = cfg.escape_factor * r0;

    match cfg.chart {
        Chart::Cartesian => {
            let field = |_t: f64, z: &DVector<f64>| {
                let mut dz =
                    DVector::from_iterator(dim, grad.iter().map(|g| -g.evaluate(z.as_slice())));
                if let Some(g) = &forcing {
                    dz += g(z);
                }
                dz
            };
            let stop = |z: &DVector<f64>| {
                let r = z.norm();
                if r < floor {
                    Some(Termination::Floor)
                } else if r > escape {
                    Some(Termination::Escaped)
                } else {
                    None
                }
            };
            let raw = ode::solve(field, z0, &params, stop);
            Ok(Trajectory::from_raw(raw, |z| z.clone()))
        }
        Chart::SigmaTheta => {
            let leading = leading.expect("leading computed");
            let p = leading.degree;
            let pm2 = (p - 2) as f64;
            // homogeneous slices of f from degree p up, with their gradients
            let parts: Vec<(u32, Polynomial, Vec<Polynomial>)> = f
                .homogeneous_parts()
                .into_iter()
                .map(|(d, poly)| {
                    let grads = poly.gradient_polys();
                    (d, poly, grads)
                })
                .collect();

            let field = move |_t: f64, y: &DVector<f64>| {
                let sigma = y[0];
                let mut th = y.rows(1, dim).clone_owned();
                let tn = th.norm();
                let in_chart = sigma.is_finite() && sigma > 0.0 && tn > 0.0;
                if !in_chart {
                    // poison the step so the control loop rejects it
                    return DVector::from_element(1 + dim, f64::NAN);
                }
                th /= tn;
                let r = sigma.powf(-1.0 / pm2);
                let mut radial = 0.0;
                let mut tangential = DVector::zeros(dim);
                for (d, poly, grads) in &parts {
                    let fj = poly.evaluate(th.as_slice());
                    let gj = DVector::from_iterator(
                        dim,
                        grads.iter().map(|g| g.evaluate(th.as_slice())),
                    );
                    let tangent = gj - &th * (*d as f64 * fj);
                    let weight = r.powi((*d - p) as i32);
                    radial += *d as f64 * weight * fj;
                    tangential += tangent * weight;
                }
                if let Some(g) = &forcing {
                    let gz = g(&(&th * r));
                    let g_rad = th.dot(&gz);
                    let scale = r.powi(1 - p as i32);
                    radial -= scale * g_rad;
                    tangential -= (gz - &th * g_rad) * scale;
                }
                let mut dy = DVector::zeros(1 + dim);
                dy[0] = pm2 * radial;
                dy.rows_mut(1, dim).copy_from(&(tangential * (-1.0 / sigma)));
                dy
            };

            // radius floor/escape translated to the inverse-power variable
            let sigma_floor = floor.powi(2 - p as i32);
            let sigma_escape = escape.powi(2 - p as i32);
            let stop = move |y: &DVector<f64>| {
                let sigma = y[0];
                if sigma >= sigma_floor {
                    Some(Termination::Floor)
                } else if sigma <= sigma_escape {
                    Some(Termination::Escaped)
                } else {
                    None
                }
            };

            let mut y_init = DVector::zeros(1 + dim);
            y_init[0] = r0.powi(2 - p as i32);
            y_init.rows_mut(1, dim).copy_from(&(z0 / r0));
            let raw = ode::solve(field, &y_init, &params, stop);
            Ok(Trajectory::from_raw(raw, |y| {
                let sigma = y[0];
                let mut th = y.rows(1, dim).clone_owned();
                let tn = th.norm();
                if tn > 0.0 {
                    th /= tn;
                }
                let r = if sigma > 0.0 {
                    sigma.powf(-1.0 / pm2)
                } else {
                    f64::NAN
                };
                th * r
            }))
        }
    }
}

/// A parabolic run with the eigenmode coordinates of every sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParabolicRun {
    pub trajectory: Trajectory,
    /// Per sample: coefficients of the state in the eigenbasis.
    pub mode_coords: Vec<DVector<f64>>,
}

/// Integrates u' = M(u) + N2(u), the first-order system of the model.
pub fn parabolic_flow(
    model: &ModelSystem,
    extra: Option<&NonlinearPerturbation>,
    u0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<ParabolicRun, IntegrateError> {
    cfg.validate()?;
    check_finite(u0)?;
    let n = model.dim();
    if u0.len() != n {
        return Err(IntegrateError::DimensionMismatch {
            expected: n,
            got: u0.len(),
        });
    }
    if let Some(e) = extra
        && e.prefactor.dim() != n
    {
        return Err(IntegrateError::DimensionMismatch {
            expected: n,
            got: e.prefactor.dim(),
        });
    }
    let out_times = cfg.output_times();
    let norm0 = u0.norm();
    let q = model.eigenvectors().clone();
    if norm0 == 0.0 {
        let traj = Trajectory::constant(u0, &out_times);
        let coords = traj.states.iter().map(|u| q.tr_mul(u)).collect();
        return Ok(ParabolicRun {
            trajectory: traj,
            mode_coords: coords,
        });
    }
    let grad = model.functional().gradient_polys();
    let prefactor = extra.map(|e| e.prefactor.clone());
    let field = move |_t: f64, u: &DVector<f64>| {
        let mut du = DVector::from_iterator(n, grad.iter().map(|g| -g.evaluate(u.as_slice())));
        if let Some(b) = &prefactor {
            du *= 1.0 + b.evaluate(u.as_slice());
        }
        du
    };
    let floor = cfg.floor_tol;
    let escape = cfg.escape_factor * norm0;
    let stop = move |u: &DVector<f64>| {
        let r = u.norm();
        if r < floor {
            Some(Termination::Floor)
        } else if r > escape {
            Some(Termination::Escaped)
        } else {
            None
        }
    };
    let params = SolveParams {
        t0: 0.0,
        out_times: &out_times,
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_steps: cfg.max_steps,
    };
    let raw = ode::solve(field, u0, &params, stop);
    let trajectory = Trajectory::from_raw(raw, |u| u.clone());
    let mode_coords = trajectory.states.iter().map(|u| q.tr_mul(u)).collect();
    Ok(ParabolicRun {
        trajectory,
        mode_coords,
    })
}

/// An elliptic phase-space run: stacked states (u, u' - m u / 2), the
/// spectral frame, and the mode coefficients of every sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EllipticRun {
    /// States are stacked (u, w) of length 2n.
    pub trajectory: Trajectory,
    pub spectral: SpectralSystem,
    pub basis: PsiBasis,
    pub coefficients: Vec<Coefficients>,
    /// Norm of the phase vector in the adapted bilinear form.
    pub gram_norms: Vec<f64>,
}

/// Integrates the second-order system u'' - m u' + M(u) = N1(u) as the
/// first-order phase system. Decaying solutions need tuned initial data;
/// escape is an expected outcome for generic starts and is reported in the
/// termination, not raised.
pub fn elliptic_flow(
    model: &ModelSystem,
    m: f64,
    u0: &DVector<f64>,
    v0: &DVector<f64>,
    extra: Option<&NonlinearPerturbation>,
    cfg: &IntegratorConfig,
) -> Result<EllipticRun, IntegrateError> {
    cfg.validate()?;
    check_finite(u0)?;
    check_finite(v0)?;
    let n = model.dim();
    if u0.len() != n || v0.len() != n {
        return Err(IntegrateError::DimensionMismatch {
            expected: n,
            got: u0.len().max(v0.len()),
        });
    }
    if let Some(e) = extra
        && e.prefactor.dim() != n
    {
        return Err(IntegrateError::DimensionMismatch {
            expected: n,
            got: e.prefactor.dim(),
        });
    }
    let spectral = SpectralSystem::new(m, model.eigenvalues().to_vec())?;
    let basis = basis_psi(&spectral);
    let out_times = cfg.output_times();

    let mut y0 = DVector::zeros(2 * n);
    y0.rows_mut(0, n).copy_from(u0);
    y0.rows_mut(n, n).copy_from(&(v0 - u0 * (m / 2.0)));
    let norm0 = y0.norm();

    let q = model.eigenvectors().clone();
    let project = |y: &DVector<f64>| PhaseVector {
        v: q.tr_mul(&y.rows(0, n).clone_owned()),
        w: q.tr_mul(&y.rows(n, n).clone_owned()),
    };

    if norm0 == 0.0 {
        let trajectory = Trajectory::constant(&y0, &out_times);
        let coefficients: Vec<Coefficients> = trajectory
            .states
            .iter()
            .map(|y| project_coefficients(&spectral, &basis, &project(y)))
            .collect::<Result<_, _>>()?;
        let gram_norms = vec![0.0; trajectory.states.len()];
        return Ok(EllipticRun {
            trajectory,
            spectral,
            basis,
            coefficients,
            gram_norms,
        });
    }

    let grad = model.functional().gradient_polys();
    let prefactor = extra.map(|e| e.prefactor.clone());
    let field = move |_t: f64, y: &DVector<f64>| {
        let u = y.rows(0, n);
        let w = y.rows(n, n);
        let mut dy = DVector::zeros(2 * n);
        for i in 0..n {
            dy[i] = w[i] + m / 2.0 * u[i];
        }
        // w' = m w / 2 + m^2 u / 4 - M(u) + N1(u), and -M = grad F
        let u_sl = u.clone_owned();
        let mut rest =
            DVector::from_iterator(n, grad.iter().map(|g| g.evaluate(u_sl.as_slice())));
        if let Some(b) = &prefactor {
            // N1 = prefactor * M = -prefactor * grad F
            rest *= 1.0 - b.evaluate(u_sl.as_slice());
        }
        for i in 0..n {
            dy[n + i] = m / 2.0 * w[i] + m * m / 4.0 * u[i] + rest[i];
        }
        dy
    };
    let floor = cfg.floor_tol;
    let escape = cfg.escape_factor * norm0;
    let stop = move |y: &DVector<f64>| {
        let r = y.norm();
        if r < floor {
            Some(Termination::Floor)
        } else if r > escape {
            Some(Termination::Escaped)
        } else {
            None
        }
    };
    let params = SolveParams {
        t0: 0.0,
        out_times: &out_times,
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_steps: cfg.max_steps,
    };
    let raw = ode::solve(field, &y0, &params, stop);
    let trajectory = Trajectory::from_raw(raw, |y| y.clone());
    let mut coefficients = Vec::with_capacity(trajectory.states.len());
    let mut gram_norms = Vec::with_capacity(trajectory.states.len());
    for y in &trajectory.states {
        let pv = project(y);
        coefficients.push(project_coefficients(&spectral, &basis, &pv)?);
        gram_norms.push(gram_norm(&spectral, &pv)?);
    }
    Ok(EllipticRun {
        trajectory,
        spectral,
        basis,
        coefficients,
        gram_norms,
    })
}

/// A slow-manifold elliptic run: kernel coordinates plus the reconstructed
/// ambient states and velocities on the manifold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlowManifoldRun {
    /// States are the kernel coordinates z.
    pub trajectory: Trajectory,
    /// u = lift(z) + H(lift(z)) per sample.
    pub full_states: Vec<DVector<f64>>,
    /// du/dt per sample, via implicit differentiation of the corrector.
    pub velocities: Vec<DVector<f64>>,
}

/// Integrates the reduced kernel dynamics z' = (1/m) P_T M(v + H(v)) of
/// the elliptic system on its slow manifold, the balance of -m u' + M(u)
/// projected to the kernel. This follows the decaying branch that direct
/// forward integration cannot reach when the system has unstable rates.
pub fn elliptic_slow_flow(
    model: &ModelSystem,
    m: f64,
    z0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<SlowManifoldRun, IntegrateError> {
    cfg.validate()?;
    check_finite(z0)?;
    if m == 0.0 || !m.is_finite() {
        return Err(IntegrateError::Spectral(
            crate::error::SpectralError::ZeroM,
        ));
    }
    let j = model.kernel_dim();
    if j == 0 {
        return Err(IntegrateError::Reduction(
            crate::error::ReductionError::EmptyKernel,
        ));
    }
    if z0.len() != j {
        return Err(IntegrateError::DimensionMismatch {
            expected: j,
            got: z0.len(),
        });
    }
    let out_times = cfg.output_times();
    if z0.norm() == 0.0 {
        let trajectory = Trajectory::constant(z0, &out_times);
        let k = trajectory.states.len();
        return Ok(SlowManifoldRun {
            trajectory,
            full_states: vec![DVector::zeros(model.dim()); k],
            velocities: vec![DVector::zeros(model.dim()); k],
        });
    }

    let reduced_field = |z: &DVector<f64>| -> Result<DVector<f64>, IntegrateError> {
        let w = reduction::corrector(model, z, reduction::CORRECTOR_TOL)?;
        let u = model.kernel_lift(z)? + w;
        let mu = model.operator_at(&u)?;
        Ok(model.kernel_coords(&mu)? * (1.0 / m))
    };

    let field = |_t: f64, z: &DVector<f64>| match reduced_field(z) {
        Ok(dz) => dz,
        // poison the step; the control loop backs off
        Err(_) => DVector::from_element(j, f64::NAN),
    };
    let floor = cfg.floor_tol;
    let escape = cfg.escape_factor * z0.norm();
    let stop = move |z: &DVector<f64>| {
        let r = z.norm();
        if r < floor {
            Some(Termination::Floor)
        } else if r > escape {
            Some(Termination::Escaped)
        } else {
            None
        }
    };
    let params = SolveParams {
        t0: 0.0,
        out_times: &out_times,
        rel: cfg.rel_tol,
        abs: cfg.abs_tol,
        max_steps: cfg.max_steps,
    };
    let raw = ode::solve(field, z0, &params, stop);
    let trajectory = Trajectory::from_raw(raw, |z| z.clone());

    // reconstruct manifold states and velocities sample by sample
    let mut full_states = Vec::with_capacity(trajectory.states.len());
    let mut velocities = Vec::with_capacity(trajectory.states.len());
    for z in &trajectory.states {
        let w = reduction::corrector(model, z, reduction::CORRECTOR_TOL)?;
        let u = model.kernel_lift(z)? + &w;
        let dz = reduced_field(z)?;
        let v_dot = model.kernel_lift(&dz)?;
        // chain rule through the corrector: u' = v' + DH v', where DH solves
        // the linearized eliminated equations
        let du = manifold_velocity(model, &u, &v_dot)?;
        full_states.push(u);
        velocities.push(du);
    }
    Ok(SlowManifoldRun {
        trajectory,
        full_states,
        velocities,
    })
}

// Velocity of the manifold point: v' plus the corrector response, obtained
// by implicit differentiation of P_perp M(v + H(v)) = 0.
fn manifold_velocity(
    model: &ModelSystem,
    u: &DVector<f64>,
    v_dot: &DVector<f64>,
) -> Result<DVector<f64>, IntegrateError> {
    let n = model.dim();
    let j = model.kernel_dim();
    if j == n {
        return Ok(v_dot.clone());
    }
    let iota = model.iota();
    let mut q = DMatrix::zeros(n, n - j);
    let mut col = 0;
    for i in 0..n {
        if i < iota || i >= iota + j {
            q.set_column(col, &model.eigenvectors().column(i));
            col += 1;
        }
    }
    let dm = model.operator_jacobian_at(u)?;
    let lhs = q.tr_mul(&dm) * &q;
    let rhs = q.tr_mul(&(&dm * v_dot));
    let y_dot = lhs.lu().solve(&rhs).ok_or({
        IntegrateError::Reduction(crate::error::ReductionError::CorrectorDiverged {
            residual: f64::NAN,
            iterations: 0,
        })
    })?;
    Ok(v_dot - q * y_dot)
}

/// Polar decomposition of a decaying trajectory: radius, direction, the
/// leading-part values along the direction, and the rescaled radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarSeries {
    pub times: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<DVector<f64>>,
    /// Leading part evaluated at the direction.
    pub fhat: Vec<f64>,
    /// Norm of the spherical gradient of the leading part at the direction.
    pub grad_fhat_norm: Vec<f64>,
    /// Cumulative great-circle arc length of the direction curve.
    pub arc_length: Vec<f64>,
    /// t^(1/(p-2)) * r, the natural rescaling of the radius.
    pub t_pow_r: Vec<f64>,
    /// True when the series stopped early at the radius floor.
    pub truncated: bool,
}

/// Tracks a trajectory in polar form against the leading part f_p.
pub fn polar_track(
    traj: &Trajectory,
    p: u32,
    f_p: &Polynomial,
    floor_tol: f64,
) -> Result<PolarSeries, IntegrateError> {
    if p < 3 {
        return Err(IntegrateError::Sphere(
            crate::error::SphereError::DegreeTooLow(p),
        ));
    }
    let dim = f_p.dim();
    let grads = f_p.gradient_polys();
    let mut series = PolarSeries {
        times: Vec::new(),
        r: Vec::new(),
        theta: Vec::new(),
        fhat: Vec::new(),
        grad_fhat_norm: Vec::new(),
        arc_length: Vec::new(),
        t_pow_r: Vec::new(),
        truncated: false,
    };
    let mut arc = KahanSum::default();
    let mut prev_theta: Option<DVector<f64>> = None;
    for (t, z) in traj.times.iter().zip(&traj.states) {
        if z.len() != dim {
            return Err(IntegrateError::DimensionMismatch {
                expected: dim,
                got: z.len(),
            });
        }
        let r = z.norm();
        if r < floor_tol {
            series.truncated = true;
            break;
        }
        let theta = z / r;
        let fhat = f_p.evaluate(theta.as_slice());
        let grad = DVector::from_iterator(
            dim,
            grads.iter().map(|g| g.evaluate(theta.as_slice())),
        );
        let tangential = &grad - &theta * (p as f64 * fhat);
        if let Some(prev) = &prev_theta {
            let chord = (&theta - prev).norm();
            arc.add(2.0 * (chord / 2.0).min(1.0).asin());
        }
        series.times.push(*t);
        series.r.push(r);
        series.fhat.push(fhat);
        series.grad_fhat_norm.push(tangential.norm());
        series.arc_length.push(arc.value());
        series.t_pow_r.push(t.powf(1.0 / (p as f64 - 2.0)) * r);
        prev_theta = Some(theta.clone());
        series.theta.push(theta);
    }
    Ok(series)
}
