//! Critical structure of the leading homogeneous potential restricted to
//! the unit sphere: the critical set, its values, sign conditions, the
//! predicted algebraic rate, and local gradient-inequality fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::SphereError;
use crate::numeric::{line_fit, rng_from_seed, standard_normal, uniform01, unit_vector};
use crate::potential::{JetOrder, Polynomial};

/// Two points closer than this (in angle) are the same critical point.
pub const ANGULAR_DEDUP: f64 = 1e-6;
/// Critical values closer than this belong to one cluster.
pub const VALUE_CLUSTER_TOL: f64 = 1e-9;
/// Tangential Hessian eigenvalues below this magnitude count as zero.
pub const ZERO_EIG_TOL: f64 = 1e-8;

const MANIFOLD_START_SHARE: f64 = 0.25;
const MANIFOLD_SPREAD: f64 = 0.1;
const MAX_SOLVER_ITERS: usize = 200;

/// Inertia of the tangential Hessian at a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorseSignature {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// One critical point of the restricted potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SphericalCritical {
    pub theta: DVector<f64>,
    pub value: f64,
    pub grad_residual: f64,
    pub morse_signature: MorseSignature,
    /// Index into the catalog's `values`.
    pub cluster_id: usize,
}

/// A value cluster whose points spread over a positive-dimensional set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifoldCluster {
    pub cluster_id: usize,
    pub value: f64,
    /// Fraction of converged starts that landed in this cluster.
    pub start_share: f64,
    /// Largest pairwise angular distance among its deduplicated points.
    pub angular_spread: f64,
    pub representative: SphericalCritical,
}

/// Critical points and values of a homogeneous potential on the sphere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalCatalog {
    pub dim: usize,
    pub degree: u32,
    /// Isolated(ish) critical points, ordered by (value, lexicographic theta).
    pub points: Vec<SphericalCritical>,
    /// Distinct critical values, ascending.
    pub values: Vec<f64>,
    /// Smallest gap between distinct values (infinite when fewer than two).
    pub min_gap: f64,
    pub value_tol: f64,
    pub angular_tol: f64,
    /// Clusters flagged as suspected critical manifolds; their points are
    /// not listed individually.
    pub manifolds: Vec<ManifoldCluster>,
    pub n_starts: usize,
    pub n_converged: usize,
}

impl CriticalCatalog {
    /// Points plus manifold representatives.
    pub fn representatives(&self) -> impl Iterator<Item = &SphericalCritical> {
        self.points
            .iter()
            .chain(self.manifolds.iter().map(|m| &m.representative))
    }

    /// Representatives whose value is within `tol` of zero.
    pub fn zero_value_points(&self, tol: f64) -> Vec<&SphericalCritical> {
        self.representatives()
            .filter(|c| c.value.abs() <= tol)
            .collect()
    }

    /// Smallest angular distance from `theta` to any representative.
    pub fn nearest_angle(&self, theta: &DVector<f64>) -> Option<(f64, &SphericalCritical)> {
        self.representatives()
            .map(|c| (angular_distance(&c.theta, theta), c))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }
}

/// Sign condition on the catalog's critical values: with `m` absent the raw
/// values are tested, with `m` present the values scaled by 1/m.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AdamsSimonVerdict {
    /// Some critical point has a strictly positive (adjusted) value.
    Positivity {
        witness: SphericalCritical,
        adjusted_value: f64,
    },
    /// The best achievable (adjusted) value is zero within tolerance.
    NonNegativityOnly {
        witness: SphericalCritical,
        adjusted_value: f64,
    },
    /// Every (adjusted) critical value is strictly negative.
    Fails { max_adjusted: f64 },
}

/// Angle between two unit vectors.
pub fn angular_distance(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos()
}

fn homogeneity(f_p: &Polynomial) -> Result<(usize, u32), SphereError> {
    match f_p.homogeneous_degree() {
        Some(p) => Ok((f_p.dim(), p)),
        None => {
            let low = f_p
                .terms()
                .map(|(_, e)| e.iter().sum::<u32>())
                .min()
                .unwrap_or(0);
            let high = f_p.degree().unwrap_or(0);
            Err(SphereError::NotHomogeneous { low, high })
        }
    }
}

fn check_unit(dim: usize, theta: &DVector<f64>) -> Result<(), SphereError> {
    if theta.len() != dim {
        return Err(SphereError::DimensionMismatch {
            expected: dim,
            got: theta.len(),
        });
    }
    let norm = theta.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(SphereError::NotUnit { norm });
    }
    Ok(())
}

/// Gradient of the restricted potential: the ambient gradient minus its
/// radial part p·f_p(theta)·theta. Orthogonal to theta up to rounding.
pub fn spherical_gradient(
    f_p: &Polynomial,
    theta: &DVector<f64>,
) -> Result<DVector<f64>, SphereError> {
    let (dim, p) = homogeneity(f_p)?;
    check_unit(dim, theta)?;
    let jet = f_p.jet(theta.as_slice(), JetOrder::WithGradient)?;
    let grad = jet.gradient.expect("gradient requested");
    Ok(grad - theta * (p as f64 * jet.value))
}

/// Hessian of the restriction in an orthonormal tangent frame. Only
/// meaningful at critical points.
pub fn tangential_hessian(
    f_p: &Polynomial,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>, SphereError> {
    let (dim, p) = homogeneity(f_p)?;
    check_unit(dim, theta)?;
    let jet = f_p.jet(theta.as_slice(), JetOrder::WithHessian)?;
    let hess = jet.hessian.expect("hessian requested");
    let b = tangent_basis(theta);
    let mut t = b.transpose() * hess * &b;
    let shift = p as f64 * jet.value;
    for i in 0..t.nrows() {
        t[(i, i)] -= shift;
    }
    Ok(t)
}

/// Eigenvalue sign counts of the tangential Hessian (threshold 1e-8).
pub fn morse_signature_at(
    f_p: &Polynomial,
    theta: &DVector<f64>,
) -> Result<MorseSignature, SphereError> {
    let t = tangential_hessian(f_p, theta)?;
    let eigs = t.symmetric_eigenvalues();
    let mut sig = MorseSignature {
        negative: 0,
        zero: 0,
        positive: 0,
    };
    for &e in eigs.iter() {
        if e.abs() <= ZERO_EIG_TOL {
            sig.zero += 1;
        } else if e < 0.0 {
            sig.negative += 1;
        } else {
            sig.positive += 1;
        }
    }
    Ok(sig)
}

// Columns 2..n of the Householder reflector sending e1 to -sign(theta_1)*theta:
// an orthonormal basis of the tangent space at theta.
fn tangent_basis(theta: &DVector<f64>) -> DMatrix<f64> {
    let n = theta.len();
    if n == 1 {
        return DMatrix::zeros(1, 0);
    }
    let mut v = theta.clone();
    v[0] += if theta[0] >= 0.0 { 1.0 } else { -1.0 };
    let vv = v.norm_squared();
    DMatrix::from_fn(n, n - 1, |i, jm1| {
        let j = jm1 + 1;
        let e = if i == j { 1.0 } else { 0.0 };
        e - 2.0 * v[i] * v[j] / vv
    })
}

/// Predicted limit of t^{1/(p-2)} |z(t)| for a positive leading value.
pub fn predicted_beta(p: u32, alpha0: f64) -> Result<f64, SphereError> {
    if p < 3 {
        return Err(SphereError::DegreeTooLow(p));
    }
    if !(alpha0 > 0.0 && alpha0.is_finite()) {
        return Err(SphereError::NonPositiveValue(alpha0));
    }
    let pf = p as f64;
    Ok((alpha0 * pf * (pf - 2.0)).powf(-1.0 / (pf - 2.0)))
}

struct Converged {
    theta: DVector<f64>,
    value: f64,
    residual: f64,
}

/// Multistart search for the critical set. Starts are the coordinate axes
/// plus `n_starts` seeded directions; endpoints are polished to
/// `|grad| <= tol`, deduplicated at angular radius 1e-6, and clustered by
/// value at 1e-9. For even degree every surviving point also contributes
/// its antipode. Value clusters capturing over 25% of converged starts
/// with angular spread above 0.1 are reported as suspected critical
/// manifolds instead of point lists.
pub fn find_critical_points(
    f_p: &Polynomial,
    n_starts: usize,
    seed: u64,
    tol: f64,
) -> Result<CriticalCatalog, SphereError> {
    let (dim, p) = homogeneity(f_p)?;
    if p < 3 {
        return Err(SphereError::DegreeTooLow(p));
    }
    if n_starts == 0 {
        return Err(SphereError::NoStarts);
    }
    let mut rng = rng_from_seed(seed);
    let mut starts: Vec<DVector<f64>> = Vec::with_capacity(n_starts + 2 * dim);
    for i in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = sgn;
            starts.push(e);
        }
    }
    for _ in 0..n_starts {
        starts.push(unit_vector(&mut rng, dim));
    }
    let total_starts = starts.len();

    let mut converged: Vec<Converged> = Vec::new();
    let mut best_residual = f64::INFINITY;
    for start in starts {
        match local_solve(f_p, p, start, tol) {
            Ok(c) => converged.push(c),
            Err(res) => best_residual = best_residual.min(res),
        }
    }
    if converged.is_empty() {
        return Err(SphereError::NoConvergence {
            best: best_residual,
        });
    }
    let n_converged = converged.len();

    // cluster endpoint values with a 1e-9 chain
    converged.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| lex_cmp(&a.theta, &b.theta))
    });
    let mut clusters: Vec<Vec<Converged>> = Vec::new();
    for c in converged {
        match clusters.last_mut() {
            Some(cl) if c.value - cl.last().unwrap().value <= VALUE_CLUSTER_TOL => cl.push(c),
            _ => clusters.push(vec![c]),
        }
    }

    let mut values: Vec<f64> = Vec::with_capacity(clusters.len());
    let mut points: Vec<SphericalCritical> = Vec::new();
    let mut manifolds: Vec<ManifoldCluster> = Vec::new();
    for (cluster_id, cluster) in clusters.iter().enumerate() {
        let share = cluster.len() as f64 / n_converged as f64;
        // dedup by angle, best residual wins
        let mut order: Vec<&Converged> = cluster.iter().collect();
        order.sort_by(|a, b| a.residual.total_cmp(&b.residual));
        let mut kept: Vec<&Converged> = Vec::new();
        for c in order {
            if kept
                .iter()
                .all(|k| angular_distance(&k.theta, &c.theta) > ANGULAR_DEDUP)
            {
                kept.push(c);
            }
        }
        let mut unique: Vec<(DVector<f64>, f64, f64)> = kept
            .iter()
            .map(|c| (c.theta.clone(), c.value, c.residual))
            .collect();
        if p % 2 == 0 {
            // the antipode is critical with the same value
            for i in 0..unique.len() {
                let anti = -&unique[i].0;
                if unique
                    .iter()
                    .all(|(t, _, _)| angular_distance(t, &anti) > ANGULAR_DEDUP)
                {
                    let value = f_p.evaluate(anti.as_slice());
                    let residual = spherical_gradient(f_p, &anti)?.norm();
                    unique.push((anti, value, residual));
                }
            }
        }
        let mean_value = unique.iter().map(|(_, v, _)| v).sum::<f64>() / unique.len() as f64;
        values.push(mean_value);

        let mut spread: f64 = 0.0;
        for i in 0..unique.len() {
            for j in (i + 1)..unique.len() {
                spread = spread.max(angular_distance(&unique[i].0, &unique[j].0));
            }
        }

        let mut cluster_points: Vec<SphericalCritical> = unique
            .into_iter()
            .map(|(theta, value, grad_residual)| {
                let morse_signature = morse_signature_at(f_p, &theta)?;
                Ok(SphericalCritical {
                    theta,
                    value,
                    grad_residual,
                    morse_signature,
                    cluster_id,
                })
            })
            .collect::<Result<_, SphereError>>()?;
        cluster_points.sort_by(|a, b| lex_cmp(&a.theta, &b.theta));

        // symmetry copies (antipodes, axes) share a value and spread wide;
        // only many distinct points indicate a continuum
        let many_points = cluster_points.len() > (2 * dim).max(4);
        if share > MANIFOLD_START_SHARE && spread > MANIFOLD_SPREAD && many_points {
            manifolds.push(ManifoldCluster {
                cluster_id,
                value: mean_value,
                start_share: share,
                angular_spread: spread,
                representative: cluster_points.swap_remove(0),
            });
        } else {
            points.append(&mut cluster_points);
        }
    }

    // cluster id stands in for the value so ulp-level value noise cannot
    // scramble the order
    points.sort_by(|a, b| {
        a.cluster_id
            .cmp(&b.cluster_id)
            .then_with(|| lex_cmp(&a.theta, &b.theta))
    });
    let min_gap = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(CriticalCatalog {
        dim,
        degree: p,
        points,
        values,
        min_gap,
        value_tol: VALUE_CLUSTER_TOL,
        angular_tol: ANGULAR_DEDUP,
        manifolds,
        n_starts: total_starts,
        n_converged,
    })
}

// Lexicographic with a dead zone: coordinate gaps below 1e-8 are rounding
// noise from the polish, far under the 1e-6 dedup separation, and must not
// influence the order.
fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > 1e-8 {
            return x.total_cmp(y);
        }
    }
    std::cmp::Ordering::Equal
}

fn residual_at(f_p: &Polynomial, pf: f64, theta: &DVector<f64>) -> (f64, DVector<f64>, f64) {
    let jet = f_p
        .jet(theta.as_slice(), JetOrder::WithGradient)
        .expect("dimension checked by caller");
    let grad = jet.gradient.expect("gradient requested");
    let res = &grad - theta * (pf * jet.value);
    (jet.value, res.clone(), res.norm())
}

// Polishes one start to a zero of the spherical gradient. Newton steps on
// the tangential residual are tried first and kept when they reduce the
// residual; otherwise a backtracking descent step on |residual|^2 runs.
// Returns the best residual on failure.
fn local_solve(
    f_p: &Polynomial,
    p: u32,
    start: DVector<f64>,
    tol: f64,
) -> Result<Converged, f64> {
    let pf = p as f64;
    let dim = start.len();
    let mut theta = start.normalize();
    let mut eta: f64 = 1.0;
    let (mut value, mut res_vec, mut res) = residual_at(f_p, pf, &theta);
    // Once inside tolerance, keep polishing while Newton still improves:
    // degenerate points converge only linearly, and stopping right at tol
    // would leave endpoints scattered wider than the dedup radius.
    let mut hit_tol = false;
    for _ in 0..MAX_SOLVER_ITERS {
        if res <= tol {
            hit_tol = true;
        }
        if res <= 1e-18 {
            break;
        }
        let jet = f_p
            .jet(theta.as_slice(), JetOrder::WithHessian)
            .expect("dimension checked");
        let grad = jet.gradient.expect("gradient requested");
        let hess = jet.hessian.expect("hessian requested");
        // ambient Jacobian of theta -> grad f(theta) - p f(theta) theta
        let mut jmat = hess;
        for i in 0..dim {
            for j in 0..dim {
                jmat[(i, j)] -= pf * theta[i] * grad[j];
                if i == j {
                    jmat[(i, j)] -= pf * jet.value;
                }
            }
        }
        let mut stepped = false;
        let b = tangent_basis(&theta);
        if b.ncols() > 0 {
            let m = b.transpose() * &jmat * &b;
            let rhs = -(b.transpose() * &res_vec);
            if let Ok(s) = m.svd(true, true).solve(&rhs, 1e-13) {
                let cand = (&theta + &b * s).normalize();
                let (cv, crv, cr) = residual_at(f_p, pf, &cand);
                if cr < res {
                    theta = cand;
                    value = cv;
                    res_vec = crv;
                    res = cr;
                    stepped = true;
                }
            }
        }
        if !stepped {
            if hit_tol {
                break; // Newton exhausted; already inside tolerance
            }
            let g_amb = jmat.transpose() * &res_vec;
            let gt = &g_amb - &theta * g_amb.dot(&theta);
            let gn2 = gt.norm_squared();
            if gn2 < 1e-32 {
                return Err(res); // stationary for the residual, not critical
            }
            let phi0 = 0.5 * res * res;
            eta = (eta * 4.0).min(1e6);
            loop {
                let cand = (&theta - &gt * eta).normalize();
                let (cv, crv, cr) = residual_at(f_p, pf, &cand);
                if 0.5 * cr * cr <= phi0 - 1e-4 * eta * gn2 {
                    theta = cand;
                    value = cv;
                    res_vec = crv;
                    res = cr;
                    break;
                }
                eta *= 0.5;
                if eta < 1e-18 {
                    return Err(res);
                }
            }
        }
    }
    if hit_tol || res <= tol {
        Ok(Converged {
            theta,
            value,
            residual: res,
        })
    } else {
        Err(res)
    }
}

/// Tests the catalog's critical values for the sign condition; `m` switches
/// to the variant that scales values by 1/m.
pub fn adams_simon_check(
    _f_p: &Polynomial,
    catalog: &CriticalCatalog,
    m: Option<f64>,
) -> Result<AdamsSimonVerdict, SphereError> {
    if let Some(m) = m
        && (m == 0.0 || !m.is_finite())
    {
        return Err(SphereError::ZeroM);
    }
    let scale = match m {
        Some(m) => 1.0 / m,
        None => 1.0,
    };
    let mut best: Option<(f64, &SphericalCritical)> = None;
    for c in catalog.representatives() {
        let adjusted = scale * c.value;
        let better = match best {
            None => true,
            Some((bv, bt)) => {
                adjusted > bv
                    || (adjusted == bv && lex_cmp(&c.theta, &bt.theta) == std::cmp::Ordering::Greater)
            }
        };
        if better {
            best = Some((adjusted, c));
        }
    }
    let (max_adjusted, witness) = best.ok_or(SphereError::EmptyCatalog)?;
    let tol = catalog.value_tol;
    if max_adjusted > tol {
        Ok(AdamsSimonVerdict::Positivity {
            witness: witness.clone(),
            adjusted_value: max_adjusted,
        })
    } else if max_adjusted >= -tol {
        Ok(AdamsSimonVerdict::NonNegativityOnly {
            witness: witness.clone(),
            adjusted_value: max_adjusted,
        })
    } else {
        Ok(AdamsSimonVerdict::Fails { max_adjusted })
    }
}

/// Power-law fit of the gradient against the value offset near a critical
/// point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LojasiewiczFit {
    pub c1: f64,
    pub rho1: f64,
    pub fit_r2: f64,
    pub n_used: usize,
}

/// Log-log regression of |spherical gradient| on |value offset| over seeded
/// samples within `radius` of the critical point.
pub fn lojasiewicz_fit(
    f_p: &Polynomial,
    theta_star: &SphericalCritical,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<LojasiewiczFit, SphereError> {
    let (dim, p) = homogeneity(f_p)?;
    check_unit(dim, &theta_star.theta)?;
    if dim < 2 {
        return Err(SphereError::DegenerateFit(
            "no tangent directions on a zero-sphere".into(),
        ));
    }
    let pf = p as f64;
    let mut rng = rng_from_seed(seed);
    let mut log_x = Vec::new();
    let mut log_y = Vec::new();
    for _ in 0..n_samples {
        // random tangent direction at theta_star
        let raw = DVector::from_fn(dim, |_, _| standard_normal(&mut rng));
        let mut v = &raw - &theta_star.theta * raw.dot(&theta_star.theta);
        let n = v.norm();
        if n < 1e-8 {
            continue;
        }
        v /= n;
        let s = radius * uniform01(&mut rng);
        let theta = (&theta_star.theta * s.cos() + v * s.sin()).normalize();
        let (value, _, grad_norm) = residual_at(f_p, pf, &theta);
        let dx = (value - theta_star.value).abs();
        if dx > 1e-14 && grad_norm > 0.0 {
            log_x.push(dx.ln());
            log_y.push(grad_norm.ln());
        }
    }
    if log_x.len() < 8 {
        return Err(SphereError::DegenerateFit(format!(
            "only {} usable samples (flat value direction)",
            log_x.len()
        )));
    }
    let fit = line_fit(&log_x, &log_y);
    Ok(LojasiewiczFit {
        c1: fit.intercept.exp(),
        rho1: fit.slope,
        fit_r2: fit.r2,
        n_used: log_x.len(),
    })
}
