//! Finite-dimensional model systems and the Lyapunov-Schmidt reduction:
//! eliminate the non-kernel directions of the gradient operator through a
//! corrector map H, then recover the reduced potential on the kernel by a
//! polynomial fit.
//!
//! The operator is M(u) = -grad F(u) and its linearization at the origin
//! is L = -hess F(0). Critical directions are the zero eigenvectors of L.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ReductionError;
use crate::potential::{JetOrder, Polynomial};
use crate::spectral::SpectralSystem;

/// Eigenvalues inside this band around zero count as kernel.
pub const KERNEL_TOL: f64 = 1e-10;
/// Allowed asymmetry in a supplied or derived operator.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Degree <= 2 coefficients of the reduced fit beyond this size are an error.
pub const LOW_ORDER_TOL: f64 = 1e-10;
/// Corrector iteration cap.
pub const MAX_CORRECTOR_ITERS: usize = 50;
/// Default residual tolerance for the corrector solve.
pub const CORRECTOR_TOL: f64 = 1e-12;

/// Gradient system u' = M(u) in n variables, with the spectral data of its
/// linearization at the origin.
#[derive(Debug, Clone)]
pub struct ModelSystem {
    f: Polynomial,
    l: DMatrix<f64>,
    /// Descending.
    eigenvalues: Vec<f64>,
    /// Columns, orthonormal, first significant component positive.
    eigenvectors: DMatrix<f64>,
    /// Count of eigenvalues above the kernel band.
    iota: usize,
    kernel_dim: usize,
}

impl ModelSystem {
    /// Builds the system from its potential; the operator is derived.
    pub fn new(f: Polynomial) -> Result<Self, ReductionError> {
        Self::build(f, None)
    }

    /// Builds the system with an explicitly supplied linear operator in
    /// place of -hess F(0).
    pub fn with_operator(f: Polynomial, l: DMatrix<f64>) -> Result<Self, ReductionError> {
        Self::build(f, Some(l))
    }

    fn build(f: Polynomial, l_override: Option<DMatrix<f64>>) -> Result<Self, ReductionError> {
        let n = f.dim();
        for (coeff, exps) in f.terms() {
            let degree: u32 = exps.iter().sum();
            if degree < 2 {
                return Err(ReductionError::NotCriticalAtOrigin {
                    what: format!("degree-{degree} term with coefficient {coeff}"),
                });
            }
        }
        let l = match l_override {
            Some(l) => {
                if l.nrows() != n || l.ncols() != n {
                    return Err(ReductionError::DimensionMismatch {
                        expected: n,
                        got: l.nrows().max(l.ncols()),
                    });
                }
                l
            }
            None => {
                let jet = f.jet(&vec![0.0; n], JetOrder::WithHessian)?;
                -jet.hessian.expect("hessian requested")
            }
        };
        let asym = (&l - l.transpose()).abs().max();
        if asym > SYMMETRY_TOL {
            return Err(ReductionError::AsymmetricOperator(asym));
        }
        let eigen = nalgebra::SymmetricEigen::new(l.clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i]).collect();
        let mut eigenvectors = DMatrix::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            let mut v = eigen.eigenvectors.column(i).clone_owned();
            if let Some(first) = v.iter().find(|x| x.abs() > 1e-12)
                && *first < 0.0
            {
                v.neg_mut();
            }
            eigenvectors.set_column(col, &v);
        }
        let iota = eigenvalues.iter().filter(|l| **l > KERNEL_TOL).count();
        let kernel_dim = eigenvalues
            .iter()
            .filter(|l| l.abs() <= KERNEL_TOL)
            .count();
        Ok(ModelSystem {
            f,
            l,
            eigenvalues,
            eigenvectors,
            iota,
            kernel_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    pub fn functional(&self) -> &Polynomial {
        &self.f
    }

    pub fn l_matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn iota(&self) -> usize {
        self.iota
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_dim
    }

    /// The gradient operator M(u) = -grad F(u).
    pub fn operator_at(&self, u: &DVector<f64>) -> Result<DVector<f64>, ReductionError> {
        self.check_dim(u.len())?;
        Ok(-self.f.gradient_at(u.as_slice())?)
    }

    /// Jacobian of M, i.e. -hess F(u).
    pub fn operator_jacobian_at(&self, u: &DVector<f64>) -> Result<DMatrix<f64>, ReductionError> {
        self.check_dim(u.len())?;
        let jet = self.f.jet(u.as_slice(), JetOrder::WithHessian)?;
        Ok(-jet.hessian.expect("hessian requested"))
    }

    /// Value of the potential.
    pub fn potential_at(&self, u: &DVector<f64>) -> Result<f64, ReductionError> {
        self.check_dim(u.len())?;
        Ok(self.f.evaluate(u.as_slice()))
    }

    /// Kernel coordinates of the tangential projection of u.
    pub fn kernel_coords(&self, u: &DVector<f64>) -> Result<DVector<f64>, ReductionError> {
        self.check_dim(u.len())?;
        let mut x = DVector::zeros(self.kernel_dim);
        for j in 0..self.kernel_dim {
            x[j] = self.eigenvectors.column(self.iota + j).dot(u);
        }
        Ok(x)
    }

    /// Kernel coordinates back to the ambient space.
    pub fn kernel_lift(&self, x: &DVector<f64>) -> Result<DVector<f64>, ReductionError> {
        if x.len() != self.kernel_dim {
            return Err(ReductionError::DimensionMismatch {
                expected: self.kernel_dim,
                got: x.len(),
            });
        }
        let mut u = DVector::zeros(self.dim());
        for j in 0..self.kernel_dim {
            u.axpy(x[j], &self.eigenvectors.column(self.iota + j).clone_owned(), 1.0);
        }
        Ok(u)
    }

    /// Orthonormal basis of the non-kernel directions, as matrix columns.
    fn perp_basis(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut q = DMatrix::zeros(n, n - self.kernel_dim);
        let mut col = 0;
        for i in 0..n {
            if i < self.iota || i >= self.iota + self.kernel_dim {
                q.set_column(col, &self.eigenvectors.column(i));
                col += 1;
            }
        }
        q
    }

    fn check_dim(&self, got: usize) -> Result<(), ReductionError> {
        if got != self.dim() {
            return Err(ReductionError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }
}

/// Spectral data of the linearization, with the phase-space partition when a
/// drift coefficient is supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Linearization {
    pub eigenvalues: Vec<f64>,
    pub iota: usize,
    pub kernel_dim: usize,
    pub spectral: Option<SpectralSystem>,
}

/// Eigen data of the model's linearization; with m, also the partition of
/// the spectrum against m^2/4 and 0.
pub fn linearize(model: &ModelSystem, m: Option<f64>) -> Result<Linearization, ReductionError> {
    let spectral = match m {
        Some(m) => Some(SpectralSystem::new(m, model.eigenvalues.clone())?),
        None => None,
    };
    Ok(Linearization {
        eigenvalues: model.eigenvalues.clone(),
        iota: model.iota,
        kernel_dim: model.kernel_dim,
        spectral,
    })
}

// Newton solve for the corrector: y in perp coordinates with
// Q^T M(lift(x) + Q y) = 0, started at y = 0.
pub(crate) fn corrector(
    model: &ModelSystem,
    x: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, ReductionError> {
    let v = model.kernel_lift(x)?;
    let q = model.perp_basis();
    let mut y = DVector::zeros(q.ncols());
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_CORRECTOR_ITERS {
        let u = &v + &q * &y;
        let r = q.tr_mul(&model.operator_at(&u)?);
        residual = r.norm();
        if residual <= tol {
            return Ok(&q * &y);
        }
        let jac = q.tr_mul(&model.operator_jacobian_at(&u)?) * &q;
        let Some(dy) = jac.lu().solve(&r) else {
            break;
        };
        y -= dy;
        if !y.iter().all(|c| c.is_finite()) {
            break;
        }
    }
    Err(ReductionError::CorrectorDiverged {
        residual,
        iterations: MAX_CORRECTOR_ITERS,
    })
}

/// The corrector H(v): the unique small solution of the non-kernel
/// equations above the kernel point v. Components of v outside the kernel
/// are ignored; the result lies in the orthogonal complement.
pub fn lyapunov_schmidt_h(
    model: &ModelSystem,
    v: &DVector<f64>,
    tol: f64,
) -> Result<DVector<f64>, ReductionError> {
    let x = model.kernel_coords(v)?;
    corrector(model, &x, tol)
}

/// The reduced potential on the kernel and its fit diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedFunctional {
    /// Polynomial in the kernel coordinates, degrees 3 and up.
    pub f: Polynomial,
    pub fit_degree: u32,
    /// Sup over the fit grid of |tangential M(v + H(v)) + grad f(v)|.
    pub residual_sup: f64,
    /// Order of integrability of f.
    pub p: u32,
    /// Leading homogeneous part of f.
    pub f_p: Polynomial,
    /// Radius actually used (shrunk if the corrector failed further out).
    pub domain_radius: f64,
    /// Chebyshev nodes per kernel axis.
    pub grid: usize,
}

/// Default fit degree: twice the lowest nonlinear degree present in F.
pub fn default_fit_degree(f: &Polynomial) -> u32 {
    let p_guess = f
        .homogeneous_parts()
        .iter()
        .map(|(d, _)| *d)
        .find(|d| *d >= 3)
        .unwrap_or(3);
    2 * p_guess
}

/// Default domain radius 0.5/(1 + third-derivative estimate at 0).
pub fn default_domain_radius(f: &Polynomial) -> f64 {
    let cubic: f64 = f
        .homogeneous_part(3)
        .terms()
        .map(|(c, _)| 6.0 * c.abs())
        .sum();
    0.5 / (1.0 + cubic)
}

// All exponent multi-indices in `dim` variables with total degree <= max.
fn exponents_up_to(dim: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    fn recurse(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, var: usize, left: u32) {
        if var + 1 == current.len() {
            current[var] = left;
            out.push(current.clone());
            return;
        }
        for e in 0..=left {
            current[var] = e;
            recurse(out, current, var + 1, left - e);
        }
    }
    for total in 0..=max {
        if dim == 0 {
            break;
        }
        recurse(&mut out, &mut current, 0, total);
    }
    out
}

/// Fits the reduced potential f(v) = F(v + H(v)) over a Chebyshev tensor
/// grid in the kernel. `None` arguments take the documented defaults. The
/// domain shrinks (halving, up to 6 times) if the corrector fails at some
/// node, and the radius actually used is reported.
pub fn reduced_functional(
    model: &ModelSystem,
    fit_degree: Option<u32>,
    domain_radius: Option<f64>,
    grid: Option<usize>,
) -> Result<ReducedFunctional, ReductionError> {
    let j = model.kernel_dim();
    if j == 0 {
        return Err(ReductionError::EmptyKernel);
    }
    let fit_degree = fit_degree.unwrap_or_else(|| default_fit_degree(&model.f));
    let rho0 = domain_radius.unwrap_or_else(|| default_domain_radius(&model.f));
    if !(rho0.is_finite() && rho0 > 0.0) {
        return Err(ReductionError::BadDomainRadius(rho0));
    }
    let grid = grid.unwrap_or(9);
    if grid < fit_degree as usize + 1 {
        return Err(ReductionError::GridTooSmall {
            need: fit_degree as usize + 1,
            got: grid,
        });
    }
    let exps = exponents_up_to(j, fit_degree);
    let rows = grid.pow(j as u32);
    if rows < exps.len() {
        return Err(ReductionError::UnderdeterminedFit {
            degree: fit_degree,
            nodes: grid,
            dim: j,
        });
    }

    // Chebyshev nodes on [-1, 1], tensorized over the kernel axes.
    let nodes: Vec<f64> = (0..grid)
        .map(|k| (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * grid) as f64).cos())
        .collect();

    let mut rho = rho0;
    let mut shrink_budget = 6;
    'retry: loop {
        let mut points: Vec<DVector<f64>> = Vec::with_capacity(rows);
        let mut correctors: Vec<DVector<f64>> = Vec::with_capacity(rows);
        let mut values = Vec::with_capacity(rows);
        for row in 0..rows {
            let mut s = DVector::zeros(j);
            let mut idx = row;
            for a in 0..j {
                s[a] = nodes[idx % grid];
                idx /= grid;
            }
            let x = &s * rho;
            match corrector(model, &x, CORRECTOR_TOL) {
                Ok(w) => {
                    let u = model.kernel_lift(&x)? + &w;
                    values.push(model.potential_at(&u)?);
                    points.push(x);
                    correctors.push(w);
                }
                Err(ReductionError::CorrectorDiverged { .. }) if shrink_budget > 0 => {
                    shrink_budget -= 1;
                    rho *= 0.5;
                    continue 'retry;
                }
                Err(e) => return Err(e),
            }
        }

        // least squares in scaled coordinates s = v/rho keeps the
        // Vandermonde well conditioned; scale coefficients back after
        let mut a = DMatrix::zeros(rows, exps.len());
        for (r, x) in points.iter().enumerate() {
            let s = x / rho;
            for (c, e) in exps.iter().enumerate() {
                a[(r, c)] = e
                    .iter()
                    .enumerate()
                    .map(|(var, &p)| s[var].powi(p as i32))
                    .product();
            }
        }
        let b = DVector::from_vec(values);
        let svd = a.svd(true, true);
        let coeffs_scaled = svd
            .solve(&b, 1e-13)
            .map_err(|_| ReductionError::UnderdeterminedFit {
                degree: fit_degree,
                nodes: grid,
                dim: j,
            })?;

        let mut fitted: Vec<(f64, Vec<u32>)> = Vec::new();
        let mut max_coeff = 0.0f64;
        for (c, e) in coeffs_scaled.iter().zip(&exps) {
            let degree: u32 = e.iter().sum();
            let coeff = c / rho.powi(degree as i32);
            max_coeff = max_coeff.max(coeff.abs());
            fitted.push((coeff, e.clone()));
        }
        for (coeff, e) in &fitted {
            let degree: u32 = e.iter().sum();
            if degree <= 2 && coeff.abs() > LOW_ORDER_TOL {
                return Err(ReductionError::LowOrderContamination {
                    degree,
                    coeff: *coeff,
                });
            }
        }
        let drop_tol = (1e-9 * max_coeff).max(1e-12);
        let f = Polynomial::from_terms(
            j,
            fitted
                .into_iter()
                .filter(|(c, e)| e.iter().sum::<u32>() >= 3 && c.abs() > drop_tol),
        )?;
        let leading = f.order_of_integrability(LOW_ORDER_TOL)?;

        let mut residual_sup = 0.0f64;
        for (x, w) in points.iter().zip(&correctors) {
            let u = model.kernel_lift(x)? + w;
            let mu = model.operator_at(&u)?;
            let tangential = model.kernel_coords(&mu)?;
            let grad_f = f.gradient_at(x.as_slice())?;
            residual_sup = residual_sup.max((tangential + grad_f).abs().max());
        }

        return Ok(ReducedFunctional {
            f,
            fit_degree,
            residual_sup,
            p: leading.degree,
            f_p: leading.part,
            domain_radius: rho,
            grid,
        });
    }
}

/// State split u = u^T + H(u^T) + u_perp.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    /// Kernel coordinates of the tangential part.
    pub x: DVector<f64>,
    /// Corrector H at those coordinates.
    pub h: DVector<f64>,
    /// What is left after subtracting the manifold point.
    pub u_perp: DVector<f64>,
}

/// Splits a state against the reduced manifold.
pub fn decompose_state(
    model: &ModelSystem,
    u: &DVector<f64>,
    tol: f64,
) -> Result<Decomposition, ReductionError> {
    let x = model.kernel_coords(u)?;
    let h = corrector(model, &x, tol)?;
    let u_perp = u - model.kernel_lift(&x)? - &h;
    Ok(Decomposition { x, h, u_perp })
}
