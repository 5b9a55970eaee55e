//! Phase-space spectral machinery for the second-order linearization:
//! the block operator on (u, shifted velocity) pairs, its adapted basis,
//! the positive bilinear form that orthonormalizes it, and projections of
//! phase states onto mode coefficients.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::SpectralError;

/// Classification tolerance on eigenvalue comparisons.
pub const PARTITION_TOL: f64 = 1e-10;

/// Spectral class of one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeClass {
    /// lambda > m^2/4: complex characteristic roots, rotating pair.
    Rotating,
    /// lambda = m^2/4: double root m/2, Jordan pair.
    Resonant,
    /// lambda = 0: kernel mode, roots {0, m}.
    Kernel,
    /// everything else: two distinct real roots.
    Hyperbolic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpectral {
    m: f64,
    lambdas: Vec<f64>,
}

/// Diagonalized second-order system u'' - m u' + lambda_i u_i = forcing,
/// with the derived per-mode data the phase-space analysis needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "RawSpectral", try_from = "RawSpectral")]
pub struct SpectralSystem {
    m: f64,
    /// Descending, with multiplicity.
    lambdas: Vec<f64>,
    classes: Vec<ModeClass>,
    /// (gamma_plus, gamma_minus) for non-rotating, non-resonant modes.
    gammas: Vec<Option<(f64, f64)>>,
    /// Rotation frequency for rotating modes.
    betas: Vec<Option<f64>>,
    /// Index of the first kernel mode (count of positive eigenvalues).
    iota: usize,
    /// Number of kernel modes.
    kernel_dim: usize,
    /// Indices within 10x of a classification boundary but outside it.
    borderline: Vec<usize>,
}

impl From<SpectralSystem> for RawSpectral {
    fn from(s: SpectralSystem) -> RawSpectral {
        RawSpectral {
            m: s.m,
            lambdas: s.lambdas,
        }
    }
}

impl TryFrom<RawSpectral> for SpectralSystem {
    type Error = SpectralError;

    fn try_from(raw: RawSpectral) -> Result<Self, Self::Error> {
        SpectralSystem::new(raw.m, raw.lambdas)
    }
}

impl SpectralSystem {
    /// Builds the system; eigenvalues are sorted descending.
    pub fn new(m: f64, mut lambdas: Vec<f64>) -> Result<Self, SpectralError> {
        if m == 0.0 || !m.is_finite() {
            return Err(SpectralError::ZeroM);
        }
        if let Some(index) = lambdas.iter().position(|l| !l.is_finite()) {
            return Err(SpectralError::NonFiniteEigenvalue { index });
        }
        lambdas.sort_by(|a, b| b.total_cmp(a));
        let quarter = m * m / 4.0;
        let mut classes = Vec::with_capacity(lambdas.len());
        let mut gammas = Vec::with_capacity(lambdas.len());
        let mut betas = Vec::with_capacity(lambdas.len());
        let mut borderline = Vec::new();
        for (i, &l) in lambdas.iter().enumerate() {
            let d_res = (l - quarter).abs();
            let d_ker = l.abs();
            if (d_res > PARTITION_TOL && d_res <= 10.0 * PARTITION_TOL)
                || (d_ker > PARTITION_TOL && d_ker <= 10.0 * PARTITION_TOL)
            {
                borderline.push(i);
            }
            let class = if d_res <= PARTITION_TOL {
                ModeClass::Resonant
            } else if d_ker <= PARTITION_TOL {
                ModeClass::Kernel
            } else if l > quarter {
                ModeClass::Rotating
            } else {
                ModeClass::Hyperbolic
            };
            classes.push(class);
            match class {
                ModeClass::Rotating => {
                    gammas.push(None);
                    betas.push(Some((l - quarter).sqrt()));
                }
                ModeClass::Resonant => {
                    gammas.push(None);
                    betas.push(None);
                }
                _ => {
                    let s = (quarter - l).sqrt();
                    gammas.push(Some((m / 2.0 + s, m / 2.0 - s)));
                    betas.push(None);
                }
            }
        }
        let kernel_dim = classes.iter().filter(|c| **c == ModeClass::Kernel).count();
        let iota = classes
            .iter()
            .position(|c| *c == ModeClass::Kernel)
            .unwrap_or_else(|| lambdas.iter().filter(|l| **l > PARTITION_TOL).count());
        Ok(SpectralSystem {
            m,
            lambdas,
            classes,
            gammas,
            betas,
            iota,
            kernel_dim,
            borderline,
        })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn classes(&self) -> &[ModeClass] {
        &self.classes
    }

    pub fn class(&self, i: usize) -> ModeClass {
        self.classes[i]
    }

    /// (gamma_plus, gamma_minus) where defined (not rotating/resonant).
    pub fn gamma_pm(&self, i: usize) -> Option<(f64, f64)> {
        self.gammas[i]
    }

    pub fn beta(&self, i: usize) -> Option<f64> {
        self.betas[i]
    }

    /// Index of the first kernel mode.
    pub fn iota(&self) -> usize {
        self.iota
    }

    /// Kernel dimension J.
    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    pub fn borderline(&self) -> &[usize] {
        &self.borderline
    }

    /// Real characteristic rates of the linear system: gamma_pm for the
    /// non-rotating modes plus m/2 for rotating/resonant envelopes.
    pub fn candidate_rates(&self) -> Vec<f64> {
        let mut rates: Vec<f64> = Vec::new();
        for g in self.gammas.iter().flatten() {
            rates.push(g.0);
            rates.push(g.1);
        }
        if self
            .classes
            .iter()
            .any(|c| matches!(c, ModeClass::Rotating | ModeClass::Resonant))
        {
            rates.push(self.m / 2.0);
        }
        rates.sort_by(f64::total_cmp);
        rates.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        rates
    }

    fn check_dim(&self, got: usize) -> Result<(), SpectralError> {
        if got != self.dim() {
            return Err(SpectralError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Point in phase space: the state and its shifted velocity u' - m/2 u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector {
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

impl PhaseVector {
    pub fn zeros(n: usize) -> Self {
        PhaseVector {
            v: DVector::zeros(n),
            w: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn scale(&self, s: f64) -> PhaseVector {
        PhaseVector {
            v: &self.v * s,
            w: &self.w * s,
        }
    }

    pub fn add(&self, other: &PhaseVector) -> PhaseVector {
        PhaseVector {
            v: &self.v + &other.v,
            w: &self.w + &other.w,
        }
    }

    pub fn sub(&self, other: &PhaseVector) -> PhaseVector {
        PhaseVector {
            v: &self.v - &other.v,
            w: &self.w - &other.w,
        }
    }

    pub fn axpy(&mut self, a: f64, x: &PhaseVector) {
        self.v.axpy(a, &x.v, 1.0);
        self.w.axpy(a, &x.w, 1.0);
    }

    /// Componentwise sup norm (diagnostic use).
    pub fn sup_norm(&self) -> f64 {
        self.v
            .iter()
            .chain(self.w.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()))
    }

    /// From a state and its plain velocity.
    pub fn from_state(m: f64, u: &DVector<f64>, u_dot: &DVector<f64>) -> Self {
        PhaseVector {
            v: u.clone(),
            w: u_dot - u * (m / 2.0),
        }
    }

    /// Plain velocity back from the shifted one.
    pub fn velocity(&self, m: f64) -> DVector<f64> {
        &self.w + &self.v * (m / 2.0)
    }
}

/// Applies the phase operator: (v, w) -> (m v/2 + w, -lambda v + m^2 v/4 + m w/2).
pub fn apply_phase_operator(
    spec: &SpectralSystem,
    q: &PhaseVector,
) -> Result<PhaseVector, SpectralError> {
    spec.check_dim(q.dim())?;
    let m = spec.m;
    let n = spec.dim();
    let mut out = PhaseVector::zeros(n);
    for i in 0..n {
        out.v[i] = m / 2.0 * q.v[i] + q.w[i];
        out.w[i] = (m * m / 4.0 - spec.lambdas[i]) * q.v[i] + m / 2.0 * q.w[i];
    }
    Ok(out)
}

/// Positive bilinear form G making the adapted basis orthonormal.
pub fn gram_g(
    spec: &SpectralSystem,
    a: &PhaseVector,
    b: &PhaseVector,
) -> Result<f64, SpectralError> {
    spec.check_dim(a.dim())?;
    spec.check_dim(b.dim())?;
    let m2 = spec.m * spec.m;
    let quarter = m2 / 4.0;
    let mut sum = 0.0;
    for i in 0..spec.dim() {
        let weight = match spec.classes[i] {
            // -(lambda - m^2/4) + 2 beta^2 = beta^2
            ModeClass::Rotating => spec.lambdas[i] - quarter,
            // -(lambda - m^2/4) + 1 = 1
            ModeClass::Resonant => 1.0,
            _ => quarter - spec.lambdas[i],
        };
        sum += weight * a.v[i] * b.v[i] + a.w[i] * b.w[i];
    }
    Ok(2.0 / m2 * sum)
}

/// G-norm of a phase vector.
pub fn gram_norm(spec: &SpectralSystem, a: &PhaseVector) -> Result<f64, SpectralError> {
    Ok(gram_g(spec, a, a)?.max(0.0).sqrt())
}

/// Extremal ratios between the G-norm and the Euclidean norm:
/// c1 |a| <= sqrt(G(a,a)) <= c2 |a|.
pub fn gram_norm_bounds(spec: &SpectralSystem) -> (f64, f64) {
    let m2 = spec.m * spec.m;
    let quarter = m2 / 4.0;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..spec.dim() {
        let weight = match spec.classes[i] {
            ModeClass::Rotating => spec.lambdas[i] - quarter,
            ModeClass::Resonant => 1.0,
            _ => quarter - spec.lambdas[i],
        };
        for w in [2.0 / m2 * weight, 2.0 / m2] {
            lo = lo.min(w);
            hi = hi.max(w);
        }
    }
    (lo.sqrt(), hi.sqrt())
}

/// Which family a basis vector belongs to, tagged by eigen index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeLabel {
    /// Rotating pair, first member (zero u-part).
    Rot1(usize),
    /// Rotating pair, second member (zero velocity-part).
    Rot2(usize),
    /// Resonant Jordan pair, generator.
    Res3(usize),
    /// Resonant Jordan pair, image.
    Res4(usize),
    /// Real-rate mode for gamma_plus.
    Plus(usize),
    /// Real-rate mode for gamma_minus.
    Minus(usize),
}

/// The adapted G-orthonormal basis, two vectors per eigen index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiBasis {
    pub vectors: Vec<(ModeLabel, PhaseVector)>,
    /// Positions (into `vectors`) of the neutral kernel modes, one per
    /// kernel index: the gamma = 0 member of the pair.
    pub upsilon: Vec<usize>,
    /// Positions of the gamma = m partners.
    pub upsilon_bar: Vec<usize>,
}

impl PsiBasis {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn upsilon_vec(&self, j: usize) -> &PhaseVector {
        &self.vectors[self.upsilon[j]].1
    }

    pub fn upsilon_bar_vec(&self, j: usize) -> &PhaseVector {
        &self.vectors[self.upsilon_bar[j]].1
    }
}

/// Builds the adapted basis. Kernel pairs are relabeled so that the
/// neutral member (rate 0) is the one picked by the sign of m.
pub fn basis_psi(spec: &SpectralSystem) -> PsiBasis {
    let n = spec.dim();
    let m = spec.m;
    let mut vectors: Vec<(ModeLabel, PhaseVector)> = Vec::with_capacity(2 * n);
    let mut upsilon = Vec::new();
    let mut upsilon_bar = Vec::new();
    let unit = |i: usize, s: f64| {
        let mut v = DVector::zeros(n);
        v[i] = s;
        v
    };
    for i in 0..n {
        match spec.classes[i] {
            ModeClass::Rotating => {
                let beta = spec.betas[i].expect("rotating mode has beta");
                vectors.push((
                    ModeLabel::Rot1(i),
                    PhaseVector {
                        v: DVector::zeros(n),
                        w: unit(i, m / std::f64::consts::SQRT_2),
                    },
                ));
                vectors.push((
                    ModeLabel::Rot2(i),
                    PhaseVector {
                        v: unit(i, m / (std::f64::consts::SQRT_2 * beta)),
                        w: DVector::zeros(n),
                    },
                ));
            }
            ModeClass::Resonant => {
                vectors.push((
                    ModeLabel::Res3(i),
                    PhaseVector {
                        v: DVector::zeros(n),
                        w: unit(i, m / std::f64::consts::SQRT_2),
                    },
                ));
                vectors.push((
                    ModeLabel::Res4(i),
                    PhaseVector {
                        v: unit(i, m / std::f64::consts::SQRT_2),
                        w: DVector::zeros(n),
                    },
                ));
            }
            ModeClass::Kernel | ModeClass::Hyperbolic => {
                let (gp, gm) = spec.gammas[i].expect("real-rate mode has gammas");
                let mk = |gamma: f64| PhaseVector {
                    v: unit(i, m / (m - 2.0 * gamma)),
                    w: unit(i, -m / 2.0),
                };
                let plus_at = vectors.len();
                vectors.push((ModeLabel::Plus(i), mk(gp)));
                vectors.push((ModeLabel::Minus(i), mk(gm)));
                if spec.classes[i] == ModeClass::Kernel {
                    // rates are {0, m}; the neutral one is gamma_minus for
                    // m > 0 and gamma_plus for m < 0
                    if m > 0.0 {
                        upsilon.push(plus_at + 1);
                        upsilon_bar.push(plus_at);
                    } else {
                        upsilon.push(plus_at);
                        upsilon_bar.push(plus_at + 1);
                    }
                }
            }
        }
    }
    PsiBasis {
        vectors,
        upsilon,
        upsilon_bar,
    }
}

/// Mode coefficients of one phase state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coefficients {
    /// Aligned with the basis vector list.
    pub entries: Vec<(ModeLabel, f64)>,
    /// Neutral kernel coefficients z_j.
    pub z: Vec<f64>,
    /// Partner coefficients zbar_j.
    pub zbar: Vec<f64>,
}

/// Projects a phase state onto the basis: every coefficient is a G-pairing.
pub fn project_coefficients(
    spec: &SpectralSystem,
    basis: &PsiBasis,
    q: &PhaseVector,
) -> Result<Coefficients, SpectralError> {
    spec.check_dim(q.dim())?;
    let mut entries = Vec::with_capacity(basis.vectors.len());
    for (label, psi) in &basis.vectors {
        entries.push((*label, gram_g(spec, q, psi)?));
    }
    let z = basis.upsilon.iter().map(|&k| entries[k].1).collect();
    let zbar = basis.upsilon_bar.iter().map(|&k| entries[k].1).collect();
    Ok(Coefficients { entries, z, zbar })
}

/// Resums coefficients against the basis.
pub fn reconstruct(basis: &PsiBasis, coeffs: &Coefficients) -> PhaseVector {
    let n = basis.vectors[0].1.dim();
    let mut q = PhaseVector::zeros(n);
    for ((_, psi), (_, c)) in basis.vectors.iter().zip(&coeffs.entries) {
        q.axpy(*c, psi);
    }
    q
}

/// One verified relation and how badly it is violated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub violation: f64,
}

/// Result of the structural self-check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub checks: Vec<IdentityCheck>,
    pub max_violation: f64,
    pub tol: f64,
    pub passed: bool,
    /// Names of relations beyond tolerance.
    pub failures: Vec<String>,
}

/// Checks orthonormality, the operator's action on every basis family, the
/// kernel relabeling, and the adjoint relations (transposition in the
/// orthonormal frame).
pub fn verify_spectral_identities(
    spec: &SpectralSystem,
    basis: &PsiBasis,
    tol: f64,
) -> Result<SpectralReport, SpectralError> {
    let m = spec.m;
    let nb = basis.vectors.len();
    let mut checks: Vec<IdentityCheck> = Vec::new();

    // (a) Gram matrix = identity
    let mut gram_violation = 0.0f64;
    for a in 0..nb {
        for b in 0..nb {
            let g = gram_g(spec, &basis.vectors[a].1, &basis.vectors[b].1)?;
            let want = if a == b { 1.0 } else { 0.0 };
            gram_violation = gram_violation.max((g - want).abs());
        }
    }
    checks.push(IdentityCheck {
        name: "gram_orthonormal".into(),
        violation: gram_violation,
    });

    // position of each label for building expected combinations
    let pos = |label: ModeLabel| -> usize {
        basis
            .vectors
            .iter()
            .position(|(l, _)| *l == label)
            .expect("complete basis")
    };
    let combo = |terms: &[(f64, usize)]| -> PhaseVector {
        let mut q = PhaseVector::zeros(spec.dim());
        for &(c, k) in terms {
            q.axpy(c, &basis.vectors[k].1);
        }
        q
    };

    // (b)-(d) action of the operator on each family
    let mut action_violation = 0.0f64;
    for (k, (label, psi)) in basis.vectors.iter().enumerate() {
        let l_psi = apply_phase_operator(spec, psi)?;
        let expected: Vec<(f64, usize)> = match *label {
            ModeLabel::Plus(i) => {
                let (gp, _) = spec.gammas[i].expect("gammas");
                vec![(gp, k)]
            }
            ModeLabel::Minus(i) => {
                let (_, gm) = spec.gammas[i].expect("gammas");
                vec![(gm, k)]
            }
            ModeLabel::Rot1(i) => {
                let beta = spec.betas[i].expect("beta");
                vec![(m / 2.0, k), (beta, pos(ModeLabel::Rot2(i)))]
            }
            ModeLabel::Rot2(i) => {
                let beta = spec.betas[i].expect("beta");
                vec![(m / 2.0, k), (-beta, pos(ModeLabel::Rot1(i)))]
            }
            ModeLabel::Res3(i) => vec![(m / 2.0, k), (1.0, pos(ModeLabel::Res4(i)))],
            ModeLabel::Res4(_) => vec![(m / 2.0, k)],
        };
        let diff = l_psi.sub(&combo(&expected));
        action_violation = action_violation.max(diff.sup_norm());
    }
    checks.push(IdentityCheck {
        name: "operator_action".into(),
        violation: action_violation,
    });

    // kernel relabeling: neutral member annihilated, partner scaled by m
    let mut kernel_violation = 0.0f64;
    for j in 0..basis.upsilon.len() {
        let ups = basis.upsilon_vec(j);
        let bar = basis.upsilon_bar_vec(j);
        kernel_violation = kernel_violation.max(apply_phase_operator(spec, ups)?.sup_norm());
        let diff = apply_phase_operator(spec, bar)?.sub(&bar.scale(m));
        kernel_violation = kernel_violation.max(diff.sup_norm());
    }
    checks.push(IdentityCheck {
        name: "kernel_pair".into(),
        violation: kernel_violation,
    });

    // (e) adjoint via transposition: the G-matrix of the operator is
    // L[a][b] = G(L psi_b, psi_a); the adjoint's action must be its transpose
    let mut l_mat = vec![vec![0.0f64; nb]; nb];
    for (b, (_, psi_b)) in basis.vectors.iter().enumerate() {
        let l_psi = apply_phase_operator(spec, psi_b)?;
        for (a, (_, psi_a)) in basis.vectors.iter().enumerate() {
            l_mat[a][b] = gram_g(spec, &l_psi, psi_a)?;
        }
    }
    let mut adjoint_violation = 0.0f64;
    for (b, row) in l_mat.iter().enumerate() {
        // adjoint matrix entry (a,b) = forward entry (b,a)
        for (a, &have) in row.iter().enumerate() {
            let target = want_adjoint(&basis.vectors, a, b);
            adjoint_violation = adjoint_violation.max((have - target).abs());
        }
    }
    checks.push(IdentityCheck {
        name: "adjoint_transpose".into(),
        violation: adjoint_violation,
    });

    let max_violation = checks
        .iter()
        .map(|c| c.violation)
        .fold(0.0f64, f64::max);
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| c.violation > tol)
        .map(|c| c.name.clone())
        .collect();
    Ok(SpectralReport {
        passed: failures.is_empty(),
        checks,
        max_violation,
        tol,
        failures,
    })
}

// The adjoint relations in coefficient form: the coefficient of psi_a in
// L^dagger psi_b. Spelled out from scratch rather than transposing the
// forward bookkeeping so the check is an independent statement.
fn want_adjoint(vectors: &[(ModeLabel, PhaseVector)], a: usize, b: usize) -> f64 {
    let (label_a, _) = vectors[a];
    let (label_b, _) = vectors[b];
    // L^dagger psi_b expressed over psi_a
    match (label_b, label_a) {
        (ModeLabel::Plus(i), ModeLabel::Plus(j)) if i == j => plus_gamma(vectors, i),
        (ModeLabel::Minus(i), ModeLabel::Minus(j)) if i == j => minus_gamma(vectors, i),
        (ModeLabel::Rot1(i), ModeLabel::Rot1(j)) if i == j => rot_m_half(vectors, i),
        (ModeLabel::Rot2(i), ModeLabel::Rot2(j)) if i == j => rot_m_half(vectors, i),
        (ModeLabel::Rot1(i), ModeLabel::Rot2(j)) if i == j => -rot_beta(vectors, i),
        (ModeLabel::Rot2(i), ModeLabel::Rot1(j)) if i == j => rot_beta(vectors, i),
        (ModeLabel::Res3(i), ModeLabel::Res3(j)) if i == j => res_m_half(vectors, i),
        (ModeLabel::Res4(i), ModeLabel::Res4(j)) if i == j => res_m_half(vectors, i),
        (ModeLabel::Res4(i), ModeLabel::Res3(j)) if i == j => 1.0,
        _ => 0.0,
    }
}

// small helpers pulling the scalars back out of the basis structure; they
// recompute from the phase vectors so the adjoint check does not reuse the
// forward bookkeeping
fn plus_gamma(vectors: &[(ModeLabel, PhaseVector)], i: usize) -> f64 {
    rate_from_vector(vectors, ModeLabel::Plus(i))
}

fn minus_gamma(vectors: &[(ModeLabel, PhaseVector)], i: usize) -> f64 {
    rate_from_vector(vectors, ModeLabel::Minus(i))
}

fn rate_from_vector(vectors: &[(ModeLabel, PhaseVector)], label: ModeLabel) -> f64 {
    // psi = (a phi, -m/2 phi) with a = m/(m - 2 gamma) gives
    // gamma = (m/2) (1 - 1/a)  ... derived by inverting a
    let (_, psi) = vectors
        .iter()
        .find(|(l, _)| *l == label)
        .expect("label present");
    let i = psi.v.iamax();
    let a = psi.v[i];
    let m = -2.0 * psi.w[i];
    m / 2.0 * (1.0 - 1.0 / a)
}

fn rot_m_half(vectors: &[(ModeLabel, PhaseVector)], i: usize) -> f64 {
    // Rot1 = (0, m/sqrt(2) phi)
    let (_, psi) = vectors
        .iter()
        .find(|(l, _)| *l == ModeLabel::Rot1(i))
        .expect("rot1 present");
    let k = psi.w.iamax();
    psi.w[k] * std::f64::consts::SQRT_2 / 2.0
}

fn rot_beta(vectors: &[(ModeLabel, PhaseVector)], i: usize) -> f64 {
    // Rot2 = (m/(sqrt(2) beta) phi, 0), Rot1 carries m/sqrt(2)
    let (_, psi1) = vectors
        .iter()
        .find(|(l, _)| *l == ModeLabel::Rot1(i))
        .expect("rot1 present");
    let (_, psi2) = vectors
        .iter()
        .find(|(l, _)| *l == ModeLabel::Rot2(i))
        .expect("rot2 present");
    let k = psi1.w.iamax();
    psi1.w[k] / psi2.v[k]
}

fn res_m_half(vectors: &[(ModeLabel, PhaseVector)], i: usize) -> f64 {
    let (_, psi) = vectors
        .iter()
        .find(|(l, _)| *l == ModeLabel::Res3(i))
        .expect("res3 present");
    let k = psi.w.iamax();
    psi.w[k] * std::f64::consts::SQRT_2 / 2.0
}
