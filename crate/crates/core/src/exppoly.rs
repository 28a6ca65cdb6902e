//! Exponential polynomials `Σ c ℓ^p e^(−γℓ)` with exact rational decay rates.
//!
//! This class is closed under addition, multiplication and the solution map of
//! `δ' = −εδ + α`, which is all the iterative flow ever needs.

use std::cmp::Ordering;

use log::warn;
use thiserror::Error;

use crate::algebra::{rational_to_f64, Coefficient, Rational};

/// Conditioning threshold on `1/(ε − γ)` above which a near-resonance is reported.
pub const SMALL_DENOMINATOR_WARNING: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpPolyError {
    #[error("limit ℓ→∞ diverges: term {c}·ℓ^{p} does not decay")]
    Divergent { c: f64, p: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpPolyTerm {
    pub c: f64,
    pub p: u32,
    pub gamma: Rational,
}

impl ExpPolyTerm {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.gamma.cmp(&other.gamma).then(self.p.cmp(&other.p))
    }

    pub fn evaluate(&self, ell: f64) -> f64 {
        self.c * ell.powi(self.p as i32) * (-rational_to_f64(self.gamma) * ell).exp()
    }
}

/// Sorted by `(gamma, p)`, one term per key, no zero coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpPoly {
    terms: Vec<ExpPolyTerm>,
}

impl ExpPoly {
    pub fn zero() -> Self {
        ExpPoly::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::term(c, 0, Rational::from_integer(0))
    }

    /// `c ℓ^p e^(−γℓ)`
    pub fn term(c: f64, p: u32, gamma: Rational) -> Self {
        Self::from_terms(vec![ExpPolyTerm { c, p, gamma }])
    }

    pub fn from_terms(mut terms: Vec<ExpPolyTerm>) -> Self {
        terms.sort_by(|a, b| a.key_cmp(b));
        let mut out: Vec<ExpPolyTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match out.last_mut() {
                Some(last) if last.key_cmp(&t) == Ordering::Equal => last.c += t.c,
                _ => out.push(t),
            }
        }
        out.retain(|t| t.c != 0.0);
        ExpPoly { terms: out }
    }

    pub fn terms(&self) -> &[ExpPolyTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn evaluate(&self, ell: f64) -> f64 {
        self.terms.iter().map(|t| t.evaluate(ell)).sum()
    }

    /// Smallest decay rate present, `None` for the zero function.
    pub fn min_gamma(&self) -> Option<Rational> {
        self.terms.first().map(|t| t.gamma)
    }

    /// True when every term carries `γ > 0`.
    pub fn decays(&self) -> bool {
        self.terms.iter().all(|t| t.gamma > Rational::from_integer(0))
    }

    /// Value at `ℓ → ∞`: the coefficient of the `(p=0, γ=0)` term.
    pub fn limit(&self) -> Result<f64, ExpPolyError> {
        let mut value = 0.0;
        for t in &self.terms {
            if t.gamma > Rational::from_integer(0) {
                break;
            }
            if t.p == 0 {
                value = t.c;
            } else {
                return Err(ExpPolyError::Divergent { c: t.c, p: t.p });
            }
        }
        Ok(value)
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut i, mut j) = (0, 0);
        while i < self.terms.len() && j < other.terms.len() {
            let (a, b) = (self.terms[i], other.terms[j]);
            match a.key_cmp(&b) {
                Ordering::Less => {
                    out.push(a);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b);
                    j += 1;
                }
                Ordering::Equal => {
                    let c = a.c + b.c;
                    if c != 0.0 {
                        out.push(ExpPolyTerm { c, ..a });
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.terms[i..]);
        out.extend_from_slice(&other.terms[j..]);
        ExpPoly { terms: out }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut prod = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                prod.push(ExpPolyTerm { c: a.c * b.c, p: a.p + b.p, gamma: a.gamma + b.gamma });
            }
        }
        Self::from_terms(prod)
    }

    pub fn scale_f64(&self, factor: f64) -> Self {
        if factor == 0.0 {
            return Self::zero();
        }
        ExpPoly { terms: self.terms.iter().map(|t| ExpPolyTerm { c: t.c * factor, ..*t }).collect() }
    }
}

/// Solves `δ' = −ε δ + α`, `δ(0) = 0`, exactly within the exponential-polynomial class.
///
/// A term of `α` with `γ = ε` integrates resonantly and gains one power of `ℓ`.
pub fn exp_poly_integrate(alpha: &ExpPoly, epsilon: Rational) -> ExpPoly {
    let mut out = Vec::new();
    let mut homogeneous = 0.0;
    for t in alpha.terms() {
        if t.gamma == epsilon {
            out.push(ExpPolyTerm { c: t.c / (t.p + 1) as f64, p: t.p + 1, gamma: epsilon });
            continue;
        }
        // particular solution e^(−γℓ) Q(ℓ) with Q' + (ε−γ) Q = c ℓ^p
        let d = rational_to_f64(epsilon - t.gamma);
        if (1.0 / d).abs() > SMALL_DENOMINATOR_WARNING {
            warn!("small denominator ε−γ = {d:e} (ε={epsilon}, γ={})", t.gamma);
        }
        let mut coeff = t.c / d;
        let mut falling = 1.0;
        for j in 0..=t.p {
            out.push(ExpPolyTerm { c: coeff * falling, p: t.p - j, gamma: t.gamma });
            if j < t.p {
                falling *= (t.p - j) as f64;
                coeff *= -1.0 / d;
            }
        }
        // Q(0) is the j = p term of the expansion
        homogeneous -= coeff * falling;
    }
    out.push(ExpPolyTerm { c: homogeneous, p: 0, gamma: epsilon });
    ExpPoly::from_terms(out)
}

impl Coefficient for ExpPoly {
    fn zero() -> Self {
        ExpPoly::zero()
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self = ExpPoly::add(self, other);
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scale(&self, factor: Rational) -> Self {
        self.scale_f64(rational_to_f64(factor))
    }
    fn conj(&self) -> Self {
        self.clone()
    }
}
