use std::collections::btree_map::{self, BTreeMap, Entry};

use super::coefficient::Coefficient;
use super::monomial::{monomial_commutator, normal_order_with_limit, ModeMonomial, DEFAULT_MAX_DEGREE};
use super::{AlgebraError, Rational};

/// Finite sum of normal-ordered words with coefficients of type `C`.
///
/// Zero coefficients are never stored, so two polynomials are equal exactly
/// when their term maps are equal.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorPolynomial<C> {
    terms: BTreeMap<ModeMonomial, C>,
}

impl<C> Default for OperatorPolynomial<C> {
    fn default() -> Self {
        OperatorPolynomial { terms: BTreeMap::new() }
    }
}

impl<C: Coefficient> FromIterator<(ModeMonomial, C)> for OperatorPolynomial<C> {
    fn from_iter<I: IntoIterator<Item = (ModeMonomial, C)>>(iter: I) -> Self {
        let mut p = OperatorPolynomial::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }
}

impl<'a, C> IntoIterator for &'a OperatorPolynomial<C> {
    type Item = (&'a ModeMonomial, &'a C);
    type IntoIter = btree_map::Iter<'a, ModeMonomial, C>;
    fn into_iter(self) -> Self::IntoIter {
        self.terms.iter()
    }
}

impl<C: Coefficient> OperatorPolynomial<C> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(mono: ModeMonomial, coeff: C) -> Self {
        let mut p = Self::zero();
        p.add_term(mono, coeff);
        p
    }

    pub fn constant(coeff: C) -> Self {
        Self::monomial(ModeMonomial::IDENTITY, coeff)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> btree_map::Iter<'_, ModeMonomial, C> {
        self.terms.iter()
    }

    pub fn monomials(&self) -> impl Iterator<Item = &ModeMonomial> {
        self.terms.keys()
    }

    pub fn get(&self, mono: &ModeMonomial) -> Option<&C> {
        self.terms.get(mono)
    }

    /// Coefficient of `mono`, zero when absent.
    pub fn coefficient(&self, mono: &ModeMonomial) -> C {
        self.terms.get(mono).cloned().unwrap_or_else(C::zero)
    }

    pub fn add_term(&mut self, mono: ModeMonomial, coeff: C) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                e.get_mut().add_assign_ref(&coeff);
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(*m, c.clone());
        }
    }

    pub fn sub_assign(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(*m, c.neg());
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn minus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.sub_assign(other);
        out
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn scale(&self, factor: Rational) -> Self {
        self.map(|c| c.scale(factor))
    }

    /// Multiplies every coefficient by `factor` from the left.
    pub fn scale_by(&self, factor: &C) -> Self {
        self.map(|c| factor.mul_ref(c))
    }

    /// Applies `f` to every coefficient, dropping results that vanish.
    pub fn map<D: Coefficient>(&self, mut f: impl FnMut(&C) -> D) -> OperatorPolynomial<D> {
        let mut out = OperatorPolynomial::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, f(c));
        }
        out
    }

    pub fn filter(&self, mut keep: impl FnMut(&ModeMonomial, &C) -> bool) -> Self {
        OperatorPolynomial {
            terms: self
                .terms
                .iter()
                .filter(|(m, c)| keep(m, c))
                .map(|(m, c)| (*m, c.clone()))
                .collect(),
        }
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    /// Normal-ordered product `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.mul_with_limit(other, DEFAULT_MAX_DEGREE)
    }

    pub fn mul_with_limit(&self, other: &Self, max_degree: u32) -> Result<Self, AlgebraError> {
        let mut out = Self::zero();
        for (ml, cl) in &self.terms {
            for (mr, cr) in &other.terms {
                let prod = cl.mul_ref(cr);
                for (m, k) in normal_order_with_limit(*ml, *mr, max_degree)? {
                    out.add_term(m, prod.scale(Rational::from_integer(k)));
                }
            }
        }
        Ok(out)
    }

    /// `[self, other] = self·other − other·self`, normal ordered.
    pub fn commutator(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.commutator_with_limit(other, DEFAULT_MAX_DEGREE)
    }

    pub fn commutator_with_limit(&self, other: &Self, max_degree: u32) -> Result<Self, AlgebraError> {
        let mut out = Self::zero();
        for (ml, cl) in &self.terms {
            for (mr, cr) in &other.terms {
                let words = monomial_commutator(*ml, *mr, max_degree)?;
                if words.is_empty() {
                    continue;
                }
                let prod = cl.mul_ref(cr);
                for (m, k) in words {
                    out.add_term(m, prod.scale(Rational::from_integer(k)));
                }
            }
        }
        Ok(out)
    }

    /// Splits into the terms with `k = r, m = n` and the remainder.
    pub fn split_diagonal(&self) -> (Self, Self) {
        let (diag, rest): (BTreeMap<_, _>, BTreeMap<_, _>) = self
            .terms
            .iter()
            .map(|(m, c)| (*m, c.clone()))
            .partition(|(m, _)| m.is_diagonal());
        (OperatorPolynomial { terms: diag }, OperatorPolynomial { terms: rest })
    }

    pub fn is_diagonal(&self) -> bool {
        self.terms.keys().all(|m| m.is_diagonal())
    }

    /// Hermitian adjoint.
    pub fn adjoint(&self) -> Self {
        self.terms.iter().map(|(m, c)| (m.adjoint(), c.conj())).collect()
    }

    /// `coeff(k,r,m,n) = conj(coeff(r,k,n,m))` for every term.
    pub fn is_hermitian(&self) -> bool {
        self.terms
            .iter()
            .all(|(m, c)| self.terms.get(&m.adjoint()).map(|a| a.conj() == *c).unwrap_or(false))
    }

    /// `P† = −P`.
    pub fn is_anti_hermitian(&self) -> bool {
        self.terms
            .iter()
            .all(|(m, c)| self.terms.get(&m.adjoint()).map(|a| a.conj() == c.neg()).unwrap_or(false))
    }
}

impl OperatorPolynomial<Rational> {
    /// `a†a`-style shorthand used throughout the tests and builders.
    pub fn from_pairs(pairs: &[((u32, u32, u32, u32), i64)]) -> Self {
        pairs
            .iter()
            .map(|&((k, r, m, n), c)| (ModeMonomial::new(k, r, m, n), Rational::from_integer(c)))
            .collect()
    }

    pub fn to_f64(&self) -> OperatorPolynomial<f64> {
        self.map(|c| super::coefficient::rational_to_f64(*c))
    }
}

impl OperatorPolynomial<f64> {
    /// Largest absolute difference of coefficients between two real polynomials.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for (m, c) in self.iter() {
            worst = worst.max((c - other.coefficient(m)).abs());
        }
        for (m, c) in other.iter() {
            if self.get(m).is_none() {
                worst = worst.max(c.abs());
            }
        }
        worst
    }
}
