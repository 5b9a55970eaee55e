//! Sparse multivariate polynomials: jets, homogeneous structure, and the
//! leading-order split that drives every rate prediction downstream.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::PotentialError;
use crate::numeric::KahanSum;

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coeff: f64,
    exps: Vec<u32>,
}

impl Term {
    fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

/// Polynomial in `dim` variables with real coefficients.
///
/// Terms are kept in ascending graded-lexicographic order with no duplicate
/// exponent vectors and no exact-zero coefficients, so structural equality
/// is polynomial equality.
///
/// Serializes as the text form: one term per line, coefficient followed by
/// one exponent per variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Term>,
}

/// How much of the local expansion to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JetOrder {
    Value,
    WithGradient,
    WithHessian,
}

/// Value and optional derivatives at a point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub value: f64,
    pub gradient: Option<DVector<f64>>,
    pub hessian: Option<DMatrix<f64>>,
}

/// Lowest degree >= 3 carrying coefficients above tolerance, with that
/// homogeneous part (sub-tolerance coefficients dropped).
#[derive(Debug, Clone)]
pub struct LeadingPart {
    pub degree: u32,
    pub part: Polynomial,
}

fn graded_lex(a: &Term, b: &Term) -> std::cmp::Ordering {
    a.degree()
        .cmp(&b.degree())
        .then_with(|| a.exps.cmp(&b.exps))
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Polynomial {
            dim,
            terms: Vec::new(),
        }
    }

    /// Builds from (coefficient, exponents) pairs; merges duplicates, drops
    /// exact zeros, sorts graded-lex.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self, PotentialError>
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        let mut acc: Vec<Term> = Vec::new();
        for (index, (coeff, exps)) in terms.into_iter().enumerate() {
            if exps.len() != dim {
                return Err(PotentialError::TermArity {
                    index,
                    expected: dim,
                    got: exps.len(),
                });
            }
            if !coeff.is_finite() {
                return Err(PotentialError::NonFiniteCoeff { index });
            }
            acc.push(Term { coeff, exps });
        }
        acc.sort_by(graded_lex);
        let mut merged: Vec<Term> = Vec::with_capacity(acc.len());
        for t in acc {
            match merged.last_mut() {
                Some(last) if last.exps == t.exps => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        Ok(Polynomial { dim, terms: merged })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Iterates (coefficient, exponents) in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (f64, &[u32])> + '_ {
        self.terms.iter().map(|t| (t.coeff, t.exps.as_slice()))
    }

    /// Total degree; None for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.last().map(Term::degree)
    }

    /// Some(d) when every term has degree d; None for zero or mixed degrees.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let first = self.terms.first()?.degree();
        self.terms
            .iter()
            .all(|t| t.degree() == first)
            .then_some(first)
    }

    /// Compensated evaluation. Panics on dimension mismatch; use [`Self::jet`]
    /// for a checked entry point.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension");
        let mut sum = KahanSum::default();
        for t in &self.terms {
            sum.add(t.coeff * monomial(x, &t.exps));
        }
        sum.value()
    }

    /// Value plus requested derivatives, all accumulated with compensation.
    pub fn jet(&self, x: &[f64], order: JetOrder) -> Result<Jet, PotentialError> {
        if x.len() != self.dim {
            return Err(PotentialError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let n = self.dim;
        let mut value = KahanSum::default();
        let mut grad = match order {
            JetOrder::Value => None,
            _ => Some(vec![KahanSum::default(); n]),
        };
        let mut hess = match order {
            JetOrder::WithHessian => Some(vec![KahanSum::default(); n * n]),
            _ => None,
        };
        for t in &self.terms {
            value.add(t.coeff * monomial(x, &t.exps));
            if let Some(g) = grad.as_mut() {
                for (i, gi) in g.iter_mut().enumerate() {
                    let e = t.exps[i];
                    if e > 0 {
                        gi.add(t.coeff * e as f64 * monomial_shift(x, &t.exps, i, 1, usize::MAX, 0));
                    }
                }
            }
            if let Some(h) = hess.as_mut() {
                for i in 0..n {
                    let ei = t.exps[i];
                    if ei >= 2 {
                        let v = t.coeff
                            * (ei * (ei - 1)) as f64
                            * monomial_shift(x, &t.exps, i, 2, usize::MAX, 0);
                        h[i * n + i].add(v);
                    }
                    for j in (i + 1)..n {
                        let ej = t.exps[j];
                        if ei >= 1 && ej >= 1 {
                            let v = t.coeff
                                * (ei * ej) as f64
                                * monomial_shift(x, &t.exps, i, 1, j, 1);
                            h[i * n + j].add(v);
                            h[j * n + i].add(v);
                        }
                    }
                }
            }
        }
        Ok(Jet {
            value: value.value(),
            gradient: grad.map(|g| DVector::from_iterator(n, g.into_iter().map(KahanSum::value))),
            hessian: hess
                .map(|h| DMatrix::from_fn(n, n, |i, j| h[i * n + j].value())),
        })
    }

    /// Convenience gradient as a vector.
    pub fn gradient_at(&self, x: &[f64]) -> Result<DVector<f64>, PotentialError> {
        Ok(self.jet(x, JetOrder::WithGradient)?.gradient.unwrap())
    }

    /// Partial derivative in variable `var` as a polynomial.
    pub fn partial(&self, var: usize) -> Polynomial {
        assert!(var < self.dim, "variable index");
        let terms = self.terms.iter().filter(|t| t.exps[var] > 0).map(|t| {
            let mut exps = t.exps.clone();
            exps[var] -= 1;
            (t.coeff * t.exps[var] as f64, exps)
        });
        Polynomial::from_terms(self.dim, terms).expect("derivative of valid terms")
    }

    /// All first partials.
    pub fn gradient_polys(&self) -> Vec<Polynomial> {
        (0..self.dim).map(|i| self.partial(i)).collect()
    }

    /// Splits into homogeneous parts, ascending degree, empty parts omitted.
    pub fn homogeneous_parts(&self) -> Vec<(u32, Polynomial)> {
        let mut parts: Vec<(u32, Polynomial)> = Vec::new();
        for t in &self.terms {
            let d = t.degree();
            match parts.last_mut() {
                Some((deg, p)) if *deg == d => p.terms.push(t.clone()),
                _ => parts.push((
                    d,
                    Polynomial {
                        dim: self.dim,
                        terms: vec![t.clone()],
                    },
                )),
            }
        }
        parts
    }

    /// The degree-`degree` homogeneous part (zero polynomial when absent).
    pub fn homogeneous_part(&self, degree: u32) -> Polynomial {
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|t| t.degree() == degree)
                .cloned()
                .collect(),
        }
    }

    /// Finds the order of integrability: the smallest degree p >= 3 whose
    /// homogeneous part carries a coefficient above `zero_tol`, together
    /// with that part (coefficients at or below tolerance removed).
    ///
    /// Errors if any coefficient of degree <= 2 exceeds the tolerance (the
    /// origin must be a degenerate critical point) or if nothing survives.
    pub fn order_of_integrability(&self, zero_tol: f64) -> Result<LeadingPart, PotentialError> {
        if !(zero_tol.is_finite() && zero_tol >= 0.0) {
            return Err(PotentialError::InvalidTolerance(zero_tol));
        }
        if let Some(bad) = self
            .terms
            .iter()
            .filter(|t| t.degree() <= 2 && t.coeff.abs() > zero_tol)
            .max_by(|a, b| a.coeff.abs().total_cmp(&b.coeff.abs()))
        {
            return Err(PotentialError::LowDegreePart {
                degree: bad.degree(),
                coeff: bad.coeff,
            });
        }
        for (degree, part) in self.homogeneous_parts() {
            if degree < 3 {
                continue;
            }
            let kept: Vec<Term> = part
                .terms
                .into_iter()
                .filter(|t| t.coeff.abs() > zero_tol)
                .collect();
            if !kept.is_empty() {
                return Ok(LeadingPart {
                    degree,
                    part: Polynomial {
                        dim: self.dim,
                        terms: kept,
                    },
                });
            }
        }
        Err(PotentialError::NoLeadingPart)
    }

    /// Sum of two polynomials over the same variables.
    pub fn checked_add(&self, other: &Polynomial) -> Result<Polynomial, PotentialError> {
        if self.dim != other.dim {
            return Err(PotentialError::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        Polynomial::from_terms(
            self.dim,
            self.terms()
                .chain(other.terms())
                .map(|(c, e)| (c, e.to_vec()))
                .collect::<Vec<_>>(),
        )
    }

    pub fn scale(&self, factor: f64) -> Polynomial {
        if factor == 0.0 {
            return Polynomial::zero(self.dim);
        }
        Polynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * factor,
                    exps: t.exps.clone(),
                })
                .collect(),
        }
    }
}

fn monomial(x: &[f64], exps: &[u32]) -> f64 {
    let mut m = 1.0;
    for (xi, &e) in x.iter().zip(exps) {
        if e > 0 {
            m *= xi.powi(e as i32);
        }
    }
    m
}

// monomial with exponents lowered by da at position a and db at position b
fn monomial_shift(x: &[f64], exps: &[u32], a: usize, da: u32, b: usize, db: u32) -> f64 {
    let mut m = 1.0;
    for (i, (xi, &e)) in x.iter().zip(exps).enumerate() {
        let e = if i == a {
            e - da
        } else if i == b {
            e - db
        } else {
            e
        };
        if e > 0 {
            m *= xi.powi(e as i32);
        }
    }
    m
}

impl fmt::Display for Polynomial {
    /// Text form: one term per line, `coeff e1 e2 ... eJ`, shortest
    /// round-trip decimal for the coefficient.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}", t.coeff)?;
            for e in &t.exps {
                write!(f, " {e}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for Polynomial {
    type Err = PotentialError;

    /// Parses the text form. Blank lines and lines starting with `#` are
    /// skipped; every data line must carry the same number of exponents.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut dim: Option<usize> = None;
        let mut terms: Vec<(f64, Vec<u32>)> = Vec::new();
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tok = line.split_whitespace();
            let coeff: f64 = tok
                .next()
                .expect("nonempty line")
                .parse()
                .map_err(|e| PotentialError::Text {
                    line: lineno + 1,
                    msg: format!("bad coefficient: {e}"),
                })?;
            if !coeff.is_finite() {
                return Err(PotentialError::Text {
                    line: lineno + 1,
                    msg: "coefficient must be finite".into(),
                });
            }
            let exps: Vec<u32> = tok
                .map(|t| {
                    t.parse().map_err(|e| PotentialError::Text {
                        line: lineno + 1,
                        msg: format!("bad exponent `{t}`: {e}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            match dim {
                None => {
                    if exps.is_empty() {
                        return Err(PotentialError::Text {
                            line: lineno + 1,
                            msg: "term needs at least one exponent".into(),
                        });
                    }
                    dim = Some(exps.len());
                }
                Some(d) if d != exps.len() => {
                    return Err(PotentialError::Text {
                        line: lineno + 1,
                        msg: format!("expected {d} exponents, got {}", exps.len()),
                    });
                }
                _ => {}
            }
            terms.push((coeff, exps));
        }
        let dim = dim.ok_or(PotentialError::Text {
            line: 0,
            msg: "no terms".into(),
        })?;
        Polynomial::from_terms(dim, terms)
    }
}

impl From<Polynomial> for String {
    fn from(p: Polynomial) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Polynomial {
    type Error = PotentialError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}
