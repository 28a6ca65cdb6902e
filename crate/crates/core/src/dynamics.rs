//! Time evolution from the transformed ladder operators.
//!
//! Running the flow on `a` and `b` with the generator of the iterative
//! procedure gives `a(∞)`, `b(∞)` as power series in the coupling. The bare
//! Fock states are recovered in the basis `|n,m⟩_∞` of the diagonal
//! Hamiltonian: the bare vacuum is annihilated by `a(∞)` and `b(∞)`, and bare
//! excited states follow by applying `a†(∞)`, `b†(∞)`. Amplitudes are then
//! finite sums of phases `e^{iE t}` with normal-form energies `E`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::algebra::{FlowParameters, ModeMonomial, OperatorPolynomial, Rational, DEFAULT_MAX_DEGREE};
use crate::exppoly::{exp_poly_integrate, ExpPoly};
use crate::iterative::{iterate_flow, IterativeError, IterativeSolution};
use crate::spectrum::{eigenvalue_from_normal_form, SpectrumError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Iterative(#[from] IterativeError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error("order {order}: transformed operator word {mono} diverges as ℓ→∞")]
    Divergent { order: usize, mono: ModeMonomial },
    #[error("order {order}: vacuum equations are inconsistent (mismatch {mismatch:e})")]
    Degenerate { order: usize, mismatch: f64 },
    #[error("state component |{n1},{n2}⟩ lies outside the {w1}×{w2} Fock window")]
    SupportOverflow { n1: u32, n2: u32, w1: u32, w2: u32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

impl Mode {
    fn annihilator(self) -> ModeMonomial {
        match self {
            Mode::A => ModeMonomial::a(),
            Mode::B => ModeMonomial::b(),
        }
    }
}

/// `Σ_n g^n X_n` with numeric word coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesOperator {
    pub coupling: f64,
    pub orders: Vec<OperatorPolynomial<f64>>,
}

impl SeriesOperator {
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    pub fn adjoint(&self) -> Self {
        SeriesOperator { coupling: self.coupling, orders: self.orders.iter().map(|o| o.adjoint()).collect() }
    }

    /// The series summed at its coupling.
    pub fn sum(&self) -> OperatorPolynomial<f64> {
        let mut out = OperatorPolynomial::zero();
        for (n, x) in self.orders.iter().enumerate() {
            let gn = self.coupling.powi(n as i32);
            out.add_assign(&x.map(|c| gn * c));
        }
        out
    }
}

/// `a(∞)` or `b(∞)` from `dA_n/dℓ = Σ_{j=1..n} [η_j, A_{n−j}]`.
pub fn transform_operator_from(which: Mode, solution: &IterativeSolution) -> Result<SeriesOperator, DynamicsError> {
    let eta = solution.generator();
    let k_max = solution.order();
    let max_degree = DEFAULT_MAX_DEGREE.max(2 * k_max as u32 + 4);
    let mut flow: Vec<OperatorPolynomial<ExpPoly>> =
        vec![OperatorPolynomial::monomial(which.annihilator(), ExpPoly::constant(1.0))];
    for n in 1..=k_max {
        let mut rate = OperatorPolynomial::zero();
        for j in 1..=n {
            rate.add_assign(&eta.orders[j].commutator_with_limit(&flow[n - j], max_degree).map_err(IterativeError::from)?);
        }
        let mut an = OperatorPolynomial::zero();
        for (m, alpha) in &rate {
            if !alpha.decays() {
                return Err(DynamicsError::Divergent { order: n, mono: *m });
            }
            an.add_term(*m, exp_poly_integrate(alpha, Rational::from_integer(0)));
        }
        flow.push(an);
    }
    let mut orders = Vec::with_capacity(flow.len());
    for (n, an) in flow.iter().enumerate() {
        let mut lim = OperatorPolynomial::zero();
        for (m, c) in an {
            lim.add_term(*m, c.limit().map_err(|_| DynamicsError::Divergent { order: n, mono: *m })?);
        }
        orders.push(lim);
    }
    Ok(SeriesOperator { coupling: solution.params.coupling(), orders })
}

/// Runs the iterative flow to order `k` and transforms one annihilator.
pub fn transform_operator(which: Mode, params: FlowParameters, k: usize) -> Result<SeriesOperator, DynamicsError> {
    let sol = iterate_flow(params, k)?;
    transform_operator_from(which, &sol)
}

/// Bounds on the occupation numbers a dressed state may reach.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FockWindow {
    pub n1: u32,
    pub n2: u32,
}

impl FockWindow {
    /// Large enough for the low excited states at order `k` and for
    /// quadratic observables applied to them.
    pub fn covering(k: usize) -> Self {
        let k = k as u32;
        FockWindow { n1: 4 * k + 8, n2: 6 * k + 8 }
    }
}

impl Default for FockWindow {
    fn default() -> Self {
        FockWindow { n1: 16, n2: 16 }
    }
}

type Sparse = BTreeMap<(u32, u32), f64>;

/// State `Σ_i g^i Σ_nm c_nm^(i) |n,m⟩_∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct DressedState {
    pub coupling: f64,
    pub orders: Vec<BTreeMap<(u32, u32), f64>>,
}

impl DressedState {
    pub fn max_order(&self) -> usize {
        self.orders.len().saturating_sub(1)
    }

    /// Coefficients summed at the coupling.
    pub fn total(&self) -> BTreeMap<(u32, u32), f64> {
        let mut out = Sparse::new();
        for (i, ci) in self.orders.iter().enumerate() {
            let gi = self.coupling.powi(i as i32);
            for (k, c) in ci {
                *out.entry(*k).or_default() += gi * c;
            }
        }
        out
    }

    /// `Σ_{i+j ≤ K} g^{i+j} ⟨self^(i)|other^(j)⟩`.
    pub fn inner(&self, other: &DressedState) -> f64 {
        let k = self.max_order().min(other.max_order());
        let mut s = 0.0;
        for i in 0..=k {
            for j in 0..=k - i {
                s += self.coupling.powi((i + j) as i32) * dot(&self.orders[i], &other.orders[j]);
            }
        }
        s
    }

    pub fn norm_sq(&self) -> f64 {
        self.inner(self)
    }
}

fn dot(x: &Sparse, y: &Sparse) -> f64 {
    x.iter().filter_map(|(k, a)| y.get(k).map(|b| a * b)).sum()
}

fn apply_word(poly: &OperatorPolynomial<f64>, state: &Sparse, out: &mut Sparse, window: FockWindow) -> Result<(), DynamicsError> {
    for (m, c) in poly {
        for (&(n1, n2), x) in state {
            if let Some((o1, o2, amp)) = m.act_on(n1, n2) {
                if o1 >= window.n1 || o2 >= window.n2 {
                    return Err(DynamicsError::SupportOverflow { n1: o1, n2: o2, w1: window.n1, w2: window.n2 });
                }
                *out.entry((o1, o2)).or_default() += c * amp * x;
            }
        }
    }
    Ok(())
}

/// Series operator applied to a series state, truncated at the state's order.
fn apply_series(op: &SeriesOperator, state: &DressedState, window: FockWindow) -> Result<DressedState, DynamicsError> {
    let k = state.max_order();
    let mut orders = vec![Sparse::new(); k + 1];
    for (n, slot) in orders.iter_mut().enumerate() {
        for j in 0..=n.min(op.max_order()) {
            apply_word(&op.orders[j], &state.orders[n - j], slot, window)?;
        }
        slot.retain(|_, c| *c != 0.0);
    }
    Ok(DressedState { coupling: state.coupling, orders })
}

/// Solves `a(∞)|0⟩ = b(∞)|0⟩ = 0`, `⟨0|0⟩ = 1` order by order with `c_00^(0) = 1`.
pub fn solve_vacuum(
    a_inf: &SeriesOperator,
    b_inf: &SeriesOperator,
    k: usize,
    window: FockWindow,
) -> Result<DressedState, DynamicsError> {
    let mut orders: Vec<Sparse> = vec![Sparse::from([((0, 0), 1.0)])];
    for i in 1..=k {
        let mut ra = Sparse::new();
        let mut rb = Sparse::new();
        for j in 1..=i.min(a_inf.max_order()) {
            apply_word(&a_inf.orders[j].map(|c| -c), &orders[i - j], &mut ra, window)?;
        }
        for j in 1..=i.min(b_inf.max_order()) {
            apply_word(&b_inf.orders[j].map(|c| -c), &orders[i - j], &mut rb, window)?;
        }
        let mut psi = Sparse::new();
        let mut mismatch: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (&(n1, n2), r) in &ra {
            let v = r / ((n1 + 1) as f64).sqrt();
            psi.insert((n1 + 1, n2), v);
            scale = scale.max(v.abs());
        }
        for (&(n1, n2), r) in &rb {
            let v = r / ((n2 + 1) as f64).sqrt();
            scale = scale.max(v.abs());
            match psi.get(&(n1, n2 + 1)) {
                Some(existing) => mismatch = mismatch.max((existing - v).abs()),
                None if n1 > 0 => mismatch = mismatch.max(v.abs()),
                None => {
                    psi.insert((n1, n2 + 1), v);
                }
            }
        }
        // components reached through a(∞) must also satisfy the b(∞) equation
        for (&(n1, n2), v) in &psi {
            if n2 > 0 && n1 > 0 && !rb.contains_key(&(n1, n2 - 1)) {
                mismatch = mismatch.max(v.abs());
            }
        }
        if mismatch > 1e-9 * scale.max(1.0) {
            return Err(DynamicsError::Degenerate { order: i, mismatch });
        }
        for &(n1, n2) in psi.keys() {
            if n1 >= window.n1 || n2 >= window.n2 {
                return Err(DynamicsError::SupportOverflow { n1, n2, w1: window.n1, w2: window.n2 });
            }
        }
        let cross: f64 = (1..i).map(|j| dot(&orders[j], &orders[i - j])).sum();
        psi.insert((0, 0), -0.5 * cross);
        psi.retain(|_, c| *c != 0.0);
        orders.push(psi);
    }
    Ok(DressedState { coupling: a_inf.coupling, orders })
}

/// `a†(∞)^k b†(∞)^m |0⟩ / √(k! m!)`, truncated at the vacuum's order.
pub fn excited_state(
    k: u32,
    m: u32,
    vacuum: &DressedState,
    a_inf: &SeriesOperator,
    b_inf: &SeriesOperator,
    window: FockWindow,
) -> Result<DressedState, DynamicsError> {
    let (ad, bd) = (a_inf.adjoint(), b_inf.adjoint());
    let mut state = vacuum.clone();
    for _ in 0..m {
        state = apply_series(&bd, &state, window)?;
    }
    for _ in 0..k {
        state = apply_series(&ad, &state, window)?;
    }
    let norm = ((1..=k).product::<u32>() as f64 * (1..=m).product::<u32>() as f64).sqrt();
    for o in state.orders.iter_mut() {
        o.values_mut().for_each(|c| *c /= norm);
    }
    Ok(state)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmplitudeTerm {
    pub a: f64,
    /// power of the coupling
    pub b: u32,
    /// normal-form energy of the contributing eigenstate
    pub energy: f64,
}

/// `f(t) = Σ_k a_k g^{b_k} e^{i E_k t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeSum {
    pub coupling: f64,
    pub terms: Vec<AmplitudeTerm>,
}

impl AmplitudeSum {
    pub fn evaluate(&self, t: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|term| Complex64::from_polar(term.a * self.coupling.powi(term.b as i32), term.energy * t))
            .sum()
    }

    /// `Σ |a_k g^{b_k}|`, an upper bound on `|f(t)|`.
    pub fn modulus_bound(&self) -> f64 {
        self.terms.iter().map(|t| (t.a * self.coupling.powi(t.b as i32)).abs()).sum()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// `⟨β| e^{iHt} |α⟩` with the phases kept exact and coefficients truncated at
/// the working order.
pub fn transition_amplitude(
    alpha: &DressedState,
    beta: &DressedState,
    normal_form: &OperatorPolynomial<f64>,
) -> Result<AmplitudeSum, DynamicsError> {
    let k = alpha.max_order().min(beta.max_order());
    let mut acc: BTreeMap<((u32, u32), u32), f64> = BTreeMap::new();
    for i in 0..=k {
        for j in 0..=k - i {
            for (key, x) in &beta.orders[i] {
                if let Some(y) = alpha.orders[j].get(key) {
                    *acc.entry((*key, (i + j) as u32)).or_default() += x * y;
                }
            }
        }
    }
    let mut energies: BTreeMap<(u32, u32), f64> = BTreeMap::new();
    let mut terms = Vec::with_capacity(acc.len());
    for ((key, b), a) in acc {
        if a == 0.0 {
            continue;
        }
        let energy = match energies.get(&key) {
            Some(e) => *e,
            None => {
                let e = eigenvalue_from_normal_form(normal_form, key.0, key.1)?;
                energies.insert(key, e);
                e
            }
        };
        terms.push(AmplitudeTerm { a, b, energy });
    }
    Ok(AmplitudeSum { coupling: alpha.coupling, terms })
}

/// `1 − Σ_β |⟨β|e^{iHt}|α⟩|²`.
pub fn completeness_residual(amplitudes: &[AmplitudeSum], t: f64) -> f64 {
    1.0 - amplitudes.iter().map(|f| f.evaluate(t).norm_sqr()).sum::<f64>()
}

/// `0.01 / |λ|^{K+1}`, infinite at zero coupling.
pub fn validity_horizon(lambda: f64, k: usize) -> f64 {
    if lambda == 0.0 {
        return f64::INFINITY;
    }
    0.01 / lambda.abs().powi(k as i32 + 1)
}

type ComplexSparse = BTreeMap<(u32, u32), Complex64>;

fn apply_numeric(poly: &OperatorPolynomial<f64>, state: &ComplexSparse, window: FockWindow) -> Result<ComplexSparse, DynamicsError> {
    let mut out = ComplexSparse::new();
    for (m, c) in poly {
        for (&(n1, n2), x) in state {
            if let Some((o1, o2, amp)) = m.act_on(n1, n2) {
                if o1 >= window.n1 || o2 >= window.n2 {
                    return Err(DynamicsError::SupportOverflow { n1: o1, n2: o2, w1: window.n1, w2: window.n2 });
                }
                *out.entry((o1, o2)).or_default() += x * (c * amp);
            }
        }
    }
    Ok(out)
}

/// Everything needed to evaluate amplitudes and observables at one coupling.
#[derive(Clone, Debug)]
pub struct FlowDynamics {
    pub solution: IterativeSolution,
    pub normal_form: OperatorPolynomial<f64>,
    pub a_inf: SeriesOperator,
    pub b_inf: SeriesOperator,
    pub vacuum: DressedState,
    pub window: FockWindow,
}

impl FlowDynamics {
    pub fn new(params: FlowParameters, k: usize, window: FockWindow) -> Result<Self, DynamicsError> {
        Self::from_solution(iterate_flow(params, k)?, window)
    }

    /// Reuses an existing iterative run; the working order is the run's order.
    pub fn from_solution(solution: IterativeSolution, window: FockWindow) -> Result<Self, DynamicsError> {
        let k = solution.order();
        let a_inf = transform_operator_from(Mode::A, &solution)?;
        let b_inf = transform_operator_from(Mode::B, &solution)?;
        let vacuum = solve_vacuum(&a_inf, &b_inf, k, window)?;
        let normal_form = solution.normal_form();
        Ok(FlowDynamics { solution, normal_form, a_inf, b_inf, vacuum, window })
    }

    pub fn order(&self) -> usize {
        self.solution.order()
    }

    pub fn excited_state(&self, k: u32, m: u32) -> Result<DressedState, DynamicsError> {
        excited_state(k, m, &self.vacuum, &self.a_inf, &self.b_inf, self.window)
    }

    pub fn amplitude(&self, alpha: &DressedState, beta: &DressedState) -> Result<AmplitudeSum, DynamicsError> {
        transition_amplitude(alpha, beta, &self.normal_form)
    }

    /// Substitutes `a → a(∞)`, `b → b(∞)` into a bare operator word by word.
    fn transformed_action(&self, obs: &OperatorPolynomial<f64>, state: &ComplexSparse) -> Result<ComplexSparse, DynamicsError> {
        let a = self.a_inf.sum();
        let b = self.b_inf.sum();
        let (ad, bd) = (a.adjoint(), b.adjoint());
        let mut out = ComplexSparse::new();
        for (m, c) in obs {
            let mut v = state.clone();
            for (op, count) in [(&b, m.n), (&bd, m.m), (&a, m.r), (&ad, m.k)] {
                for _ in 0..count {
                    v = apply_numeric(op, &v, self.window)?;
                }
            }
            for (key, x) in v {
                *out.entry(key).or_default() += x * c;
            }
        }
        Ok(out)
    }

    /// `⟨α(t)| obs(∞) |α(t)⟩` with `|α(t)⟩ = e^{iHt}|α⟩`; returns the real part
    /// and the magnitude of the imaginary residue.
    pub fn expectation_observable(
        &self,
        obs: &OperatorPolynomial<f64>,
        alpha: &DressedState,
        t: f64,
    ) -> Result<(f64, f64), DynamicsError> {
        let mut psi = ComplexSparse::new();
        for (key, c) in alpha.total() {
            let e = eigenvalue_from_normal_form(&self.normal_form, key.0, key.1)?;
            psi.insert(key, Complex64::from_polar(c, e * t));
        }
        let o_psi = self.transformed_action(obs, &psi)?;
        let val: Complex64 = psi.iter().filter_map(|(k, x)| o_psi.get(k).map(|y| x.conj() * y)).sum();
        Ok((val.re, val.im.abs()))
    }
}

/// `q̂₁ = (a†+a)/√2` squared, as a bare operator.
pub fn position_squared(which: Mode) -> OperatorPolynomial<f64> {
    let (up, down) = match which {
        Mode::A => (ModeMonomial::a_dag(), ModeMonomial::a()),
        Mode::B => (ModeMonomial::b_dag(), ModeMonomial::b()),
    };
    let q: OperatorPolynomial<f64> = [(up, 0.5f64.sqrt()), (down, 0.5f64.sqrt())].into_iter().collect();
    q.mul(&q).expect("small word")
}

/// `p̂² = −(a†−a)²/2`, as a bare operator.
pub fn momentum_squared(which: Mode) -> OperatorPolynomial<f64> {
    let (up, down) = match which {
        Mode::A => (ModeMonomial::a_dag(), ModeMonomial::a()),
        Mode::B => (ModeMonomial::b_dag(), ModeMonomial::b()),
    };
    let d: OperatorPolynomial<f64> = [(up, 1.0), (down, -1.0)].into_iter().collect();
    d.mul(&d).expect("small word").map(|c| -0.5 * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free() -> FlowDynamics {
        FlowDynamics::new(FlowParameters::incommensurate_reference().with_lambda(0.0), 2, FockWindow::default()).unwrap()
    }

    #[test]
    fn zeroth_order_operator_is_bare() {
        let a = transform_operator(Mode::A, FlowParameters::incommensurate_reference(), 2).unwrap();
        assert_eq!(a.orders[0], OperatorPolynomial::monomial(ModeMonomial::a(), 1.0));
        assert!(a.orders[1].iter().all(|(m, _)| m.degree() == 2));
    }

    #[test]
    fn free_amplitude_is_a_pure_phase() {
        let d = free();
        let s = d.excited_state(1, 0).unwrap();
        let f = d.amplitude(&s, &s).unwrap();
        assert_eq!(f.terms.iter().filter(|t| t.b == 0).count(), 1);
        for t in [0.0, 1.0, 17.3] {
            assert!((f.evaluate(t).norm() - 1.0).abs() < 1e-14);
        }
        assert!(completeness_residual(&[f], 4.0).abs() < 1e-14);
    }

    #[test]
    fn free_position_variances() {
        let d = free();
        let q = position_squared(Mode::A);
        let (v0, im) = d.expectation_observable(&q, &d.vacuum, 2.5).unwrap();
        assert!((v0 - 0.5).abs() < 1e-14 && im < 1e-14);
        let s = d.excited_state(1, 0).unwrap();
        let (v1, _) = d.expectation_observable(&q, &s, 7.0).unwrap();
        assert!((v1 - 1.5).abs() < 1e-14);
        let (p1, _) = d.expectation_observable(&momentum_squared(Mode::A), &s, 7.0).unwrap();
        assert!((p1 - 1.5).abs() < 1e-14);
    }

    #[test]
    fn horizon_formula() {
        assert!((validity_horizon(-0.1, 6) - 1e5).abs() < 1e-6);
        assert!((validity_horizon(-0.2, 6) - 781.25).abs() < 1e-9);
        assert!(validity_horizon(0.0, 6).is_infinite());
    }

    #[test]
    fn window_overflow_is_reported() {
        let d = FlowDynamics::new(FlowParameters::incommensurate_reference(), 3, FockWindow { n1: 4, n2: 4 });
        assert!(matches!(d, Err(DynamicsError::SupportOverflow { .. })));
    }
}
