//! Order-by-order solution of the flow `dH/dℓ = [[H₀, H], H]` in powers of the
//! coupling.
//!
//! With the generator `η = [H₀, H]`, every word `T` is an eigenoperator of
//! `[H₀, ·]` with eigenvalue `ω_T`, so each coefficient of `H_n` obeys
//! `δ' = −ε_T δ + α(ℓ)` where `α` only involves lower orders. All coefficients
//! stay inside the exponential-polynomial class and are solved in closed form.

use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{
    build_henon_heiles, monomial_commutator, rational_to_f64, AlgebraError, FlowParameters, ModeMonomial,
    OperatorPolynomial, Rational, DEFAULT_MAX_DEGREE,
};
use crate::exppoly::{exp_poly_integrate, ExpPoly, ExpPolyError, ExpPolyTerm};

/// Default cap on the number of words in a single order.
pub const DEFAULT_TERM_BUDGET: usize = 20_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IterativeError {
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("order {order}: {terms} words exceed the budget of {budget}")]
    TermBudget { order: usize, terms: usize, budget: usize },
    #[error("order {order}: inhomogeneity of {mono} has a non-decaying term")]
    NonDecayingInhomogeneity { order: usize, mono: ModeMonomial },
    #[error("order {order}: coefficient of {mono} diverges as ℓ→∞ ({source})")]
    DivergentLimit { order: usize, mono: ModeMonomial, source: ExpPolyError },
}

/// `H(ℓ) = Σ_k g^k H_k(ℓ)`, one operator polynomial per power of the coupling.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaSeriesOperator {
    pub orders: Vec<OperatorPolynomial<ExpPoly>>,
}

impl LambdaSeriesOperator {
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    /// Numeric coefficients of `H_k(ℓ)`.
    pub fn order_at(&self, k: usize, ell: f64) -> OperatorPolynomial<f64> {
        self.orders[k].map(|c| c.evaluate(ell))
    }

    /// `Σ_{k ≤ max_order} g^k H_k(ℓ)`.
    pub fn sum_at(&self, ell: f64, coupling: f64, max_order: usize) -> OperatorPolynomial<f64> {
        let mut out = OperatorPolynomial::zero();
        for (k, h) in self.orders.iter().enumerate().take(max_order + 1) {
            let gk = coupling.powi(k as i32);
            out.add_assign(&h.map(|c| gk * c.evaluate(ell)));
        }
        out
    }
}

/// The ℓ → ∞ limits `H_k(∞)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesLimit {
    pub orders: Vec<OperatorPolynomial<f64>>,
}

impl SeriesLimit {
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    /// `Σ_{k ≤ max_order} g^k H_k(∞)`.
    pub fn sum(&self, coupling: f64, max_order: usize) -> OperatorPolynomial<f64> {
        let mut out = OperatorPolynomial::zero();
        for (k, h) in self.orders.iter().enumerate().take(max_order + 1) {
            let gk = coupling.powi(k as i32);
            out.add_assign(&h.map(|c| gk * c));
        }
        out
    }
}

/// Result of [`iterate_flow`].
#[derive(Clone, Debug)]
pub struct IterativeSolution {
    pub params: FlowParameters,
    /// ℓ-dependent orders `H_0 … H_K`
    pub series: LambdaSeriesOperator,
    /// their ℓ → ∞ limits
    pub limit: SeriesLimit,
}

impl IterativeSolution {
    pub fn order(&self) -> usize {
        self.series.max_order()
    }

    /// Transformed Hamiltonian at ℓ = ∞ through order `max_order`, including
    /// the zero-point constant.
    pub fn hamiltonian_at_infinity(&self, max_order: usize) -> OperatorPolynomial<f64> {
        let mut h = self.limit.sum(self.params.coupling(), max_order);
        h.add_term(ModeMonomial::IDENTITY, rational_to_f64(self.params.zero_point()));
        h
    }

    /// Diagonal normal form through the full order, zero point included.
    pub fn normal_form(&self) -> OperatorPolynomial<f64> {
        self.hamiltonian_at_infinity(self.order()).split_diagonal().0
    }

    /// Generator `η_k(ℓ) = [H₀, H_k(ℓ)]` for every order.
    pub fn generator(&self) -> LambdaSeriesOperator {
        gustavson_generator(&self.series)
    }
}

/// `η_k = [H₀, H_k]` computed with the exact commutator against the series' `H₀`.
pub fn gustavson_generator(series: &LambdaSeriesOperator) -> LambdaSeriesOperator {
    let h0 = &series.orders[0];
    let orders = series
        .orders
        .iter()
        .enumerate()
        .map(|(k, hk)| {
            if k == 0 {
                OperatorPolynomial::zero()
            } else {
                h0.commutator(hk).expect("commutator with a quadratic H₀ keeps the degree")
            }
        })
        .collect();
    LambdaSeriesOperator { orders }
}

/// Memoized exact commutators of words.
#[derive(Default)]
pub(crate) struct CommutatorCache {
    map: Mutex<HashMap<(ModeMonomial, ModeMonomial), std::sync::Arc<Vec<(ModeMonomial, i64)>>>>,
}

impl CommutatorCache {
    pub(crate) fn get(
        &self,
        left: ModeMonomial,
        right: ModeMonomial,
    ) -> Result<std::sync::Arc<Vec<(ModeMonomial, i64)>>, AlgebraError> {
        if let Some(hit) = self.map.lock().unwrap().get(&(left, right)) {
            return Ok(hit.clone());
        }
        let value = std::sync::Arc::new(monomial_commutator(left, right, DEFAULT_MAX_DEGREE)?);
        self.map.lock().unwrap().insert((left, right), value.clone());
        Ok(value)
    }
}

/// Accumulates `Σ_pairs ω_T c_T c_S [T, S]` for words `T` of `left` and `S` of `right`.
///
/// Raw terms are collected per output word and merged once at the end.
pub(crate) fn generator_commutator(
    left: &OperatorPolynomial<ExpPoly>,
    right: &OperatorPolynomial<ExpPoly>,
    omega: impl Fn(&ModeMonomial) -> Rational + Sync,
    cache: &CommutatorCache,
) -> Result<HashMap<ModeMonomial, Vec<ExpPolyTerm>>, AlgebraError> {
    let lefts: Vec<(&ModeMonomial, &ExpPoly, f64)> = left
        .iter()
        .filter_map(|(m, c)| {
            let w = omega(m);
            (w != Rational::from_integer(0)).then(|| (m, c, rational_to_f64(w)))
        })
        .collect();
    let rights: Vec<(&ModeMonomial, &ExpPoly)> = right.iter().collect();

    lefts
        .par_iter()
        .map(|(tm, tc, w)| {
            let mut local: HashMap<ModeMonomial, Vec<ExpPolyTerm>> = HashMap::new();
            for (sm, sc) in &rights {
                let comm = cache.get(**tm, **sm)?;
                if comm.is_empty() {
                    continue;
                }
                let prod = tc.mul(sc);
                for (out, k) in comm.iter() {
                    let f = w * *k as f64;
                    local
                        .entry(*out)
                        .or_default()
                        .extend(prod.terms().iter().map(|t| ExpPolyTerm { c: t.c * f, ..*t }));
                }
            }
            Ok(local)
        })
        .try_reduce(HashMap::new, |mut a, b| {
            for (m, mut terms) in b {
                a.entry(m).or_default().append(&mut terms);
            }
            Ok(a)
        })
}

/// Runs the iterative flow to order `max_order` with the default term budget.
pub fn iterate_flow(params: FlowParameters, max_order: usize) -> Result<IterativeSolution, IterativeError> {
    iterate_flow_with_budget(params, max_order, DEFAULT_TERM_BUDGET)
}

pub fn iterate_flow_with_budget(
    params: FlowParameters,
    max_order: usize,
    term_budget: usize,
) -> Result<IterativeSolution, IterativeError> {
    if max_order < 1 {
        return Err(IterativeError::InvalidOrder);
    }
    let (w, v) = (params.w, params.v);
    let hh = build_henon_heiles(params, false);
    let cache = CommutatorCache::default();

    let mut orders: Vec<OperatorPolynomial<ExpPoly>> = Vec::with_capacity(max_order + 1);
    orders.push(hh.free.map(|c| ExpPoly::constant(rational_to_f64(*c))));
    orders.push(
        hh.interaction
            .iter()
            .map(|(m, c)| (*m, ExpPoly::term(rational_to_f64(*c), 0, m.epsilon(w, v))))
            .collect(),
    );

    for n in 2..=max_order {
        let mut raw: HashMap<ModeMonomial, Vec<ExpPolyTerm>> = HashMap::new();
        for a in 1..n {
            let part = generator_commutator(&orders[a], &orders[n - a], |m| m.eigenfrequency(w, v), &cache)?;
            for (m, mut terms) in part {
                raw.entry(m).or_default().append(&mut terms);
            }
        }
        let mut entries: Vec<(ModeMonomial, Vec<ExpPolyTerm>)> = raw.into_iter().collect();
        entries.sort_by_key(|(m, _)| *m);
        let solved: Result<Vec<(ModeMonomial, ExpPoly)>, IterativeError> = entries
            .into_par_iter()
            .map(|(mono, terms)| {
                let alpha = ExpPoly::from_terms(terms);
                if !alpha.decays() {
                    return Err(IterativeError::NonDecayingInhomogeneity { order: n, mono });
                }
                Ok((mono, exp_poly_integrate(&alpha, mono.epsilon(w, v))))
            })
            .collect();
        let hn: OperatorPolynomial<ExpPoly> = solved?.into_iter().collect();
        if hn.len() > term_budget {
            return Err(IterativeError::TermBudget { order: n, terms: hn.len(), budget: term_budget });
        }
        log::debug!("order {n}: {} words", hn.len());
        orders.push(hn);
    }

    let mut limits = Vec::with_capacity(orders.len());
    for (k, hk) in orders.iter().enumerate() {
        let mut lim = OperatorPolynomial::zero();
        for (m, c) in hk {
            let value = c
                .limit()
                .map_err(|source| IterativeError::DivergentLimit { order: k, mono: *m, source })?;
            lim.add_term(*m, value);
        }
        limits.push(lim);
    }

    Ok(IterativeSolution {
        params,
        series: LambdaSeriesOperator { orders },
        limit: SeriesLimit { orders: limits },
    })
}

/// Off-diagonal words of `h_inf` that are resonant, `ε = 0` with `k ≠ r` or `m ≠ n`.
pub fn resonant_residue(h_inf: &OperatorPolynomial<f64>, params: &FlowParameters) -> OperatorPolynomial<f64> {
    h_inf.filter(|m, _| !m.is_diagonal() && m.eigenfrequency(params.w, params.v) == Rational::from_integer(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_order_vanishes_at_infinity_when_incommensurate() {
        let sol = iterate_flow(FlowParameters::incommensurate_reference(), 1).unwrap();
        assert!(sol.limit.orders[1].iter().all(|(_, c)| *c == 0.0) || sol.limit.orders[1].is_empty());
        assert!(sol.series.orders[0].iter().all(|(m, _)| m.is_diagonal()));
    }

    #[test]
    fn zeroth_order_generator_vanishes() {
        let sol = iterate_flow(FlowParameters::incommensurate_reference(), 2).unwrap();
        let only_h0 = LambdaSeriesOperator { orders: vec![sol.series.orders[0].clone()] };
        assert!(gustavson_generator(&only_h0).orders[0].is_zero());
    }

    #[test]
    fn generator_is_anti_hermitian_and_skips_diagonal_words() {
        let sol = iterate_flow(FlowParameters::incommensurate_reference(), 3).unwrap();
        let eta = sol.generator();
        for ell in [0.0, 0.4, 3.0] {
            for k in 1..=3 {
                let e = eta.order_at(k, ell);
                assert!(e.iter().all(|(m, _)| !m.is_diagonal()));
                for (m, c) in &e {
                    let partner = e.coefficient(&m.adjoint());
                    assert!((c + partner).abs() < 1e-12 * c.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn residue_empty_for_incommensurate() {
        let sol = iterate_flow(FlowParameters::incommensurate_reference(), 4).unwrap();
        let h = sol.hamiltonian_at_infinity(4);
        assert!(resonant_residue(&h, &sol.params).is_empty());
        let (_, rest) = h.split_diagonal();
        assert!(rest.is_empty());
    }

    #[test]
    fn budget_is_enforced() {
        let err = iterate_flow_with_budget(FlowParameters::incommensurate_reference(), 3, 5).unwrap_err();
        assert!(matches!(err, IterativeError::TermBudget { order: 2, .. }));
        assert!(matches!(iterate_flow(FlowParameters::incommensurate_reference(), 0), Err(IterativeError::InvalidOrder)));
    }
}
