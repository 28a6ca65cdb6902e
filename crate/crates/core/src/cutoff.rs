//! Cut-off procedure: a finite ansatz for `H(ℓ)` is closed by dropping every
//! product above a fixed nominal order in the coupling, and the resulting
//! polynomial ODE system is integrated numerically until `H` is diagonal.
//!
//! The double commutator `[[H_d, H_r], H]` is expanded with symbolic
//! coefficients, so the right-hand sides come out as exact polynomials in the
//! state variables. In the unscaled variables the system does not depend on
//! the coupling at all; the coupling only enters through the initial values.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::algebra::{
    build_henon_heiles, monomial_commutator, rational_to_f64, AlgebraError, Coefficient, FlowParameters,
    ModeMonomial, OperatorPolynomial, Rational, DEFAULT_MAX_DEGREE,
};
use crate::ode::{OdeError, Rk45, Termination};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_ELL_MAX: f64 = 1e4;
/// Accepted-step budget; converging flows need about 10⁴ steps.
pub const STEP_BUDGET: usize = 200_000;
/// Off-diagonal family count expected at truncation order 4.
pub const EXPECTED_ORDER4_FAMILIES: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CutoffError {
    #[error("truncation order must be 2, 3 or 4, got {0}")]
    InvalidOrder(u32),
    #[error("tolerance must be positive and finite")]
    InvalidTolerance,
    #[error("state layout does not match the system ({expected} variables expected, got {got})")]
    Layout { expected: usize, got: usize },
    #[error("ansatz not closed: generated word {mono} has no slot")]
    Orphan { mono: ModeMonomial },
    #[error("ansatz not closed: families sharing {mono} cannot represent the generated terms")]
    Inconsistent { mono: ModeMonomial },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("no convergence by ℓ={ell}: off-diagonal residual {residual:e}")]
    NotConverged { ell: f64, residual: f64 },
    #[error("renormalized frequencies w={w}, v={v} are not both positive")]
    FrequencyCollapse { w: f64, v: f64 },
}

/// Polynomial in the state variables with exact coefficients; a key lists the
/// variable indices of one product in ascending order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct StatePolynomial {
    terms: BTreeMap<Vec<u16>, Rational>,
}

impl StatePolynomial {
    pub fn variable(index: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![index as u16], Rational::from_integer(1));
        StatePolynomial { terms }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u16], &Rational)> {
        self.terms.iter().map(|(k, c)| (k.as_slice(), c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, factors: &[u16]) -> Rational {
        self.terms.get(factors).copied().unwrap_or_else(|| Rational::from_integer(0))
    }

    fn min_order(&self, orders: &[u32]) -> u32 {
        self.terms.keys().map(|k| product_order(k, orders)).min().unwrap_or(u32::MAX)
    }

    fn truncated(&self, orders: &[u32], max_order: u32) -> Self {
        StatePolynomial {
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| product_order(k, orders) <= max_order)
                .map(|(k, c)| (k.clone(), *c))
                .collect(),
        }
    }

    fn mul_truncated(&self, other: &Self, orders: &[u32], max_order: u32) -> Self {
        let mut out = StatePolynomial::default();
        for (ka, ca) in &self.terms {
            let oa = product_order(ka, orders);
            for (kb, cb) in &other.terms {
                if oa + product_order(kb, orders) > max_order {
                    continue;
                }
                let mut key = ka.clone();
                key.extend_from_slice(kb);
                key.sort_unstable();
                out.add_term(key, ca * cb);
            }
        }
        out
    }

    fn add_term(&mut self, key: Vec<u16>, c: Rational) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(key) {
            Entry::Vacant(e) => {
                if c != Rational::from_integer(0) {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if *e.get() == Rational::from_integer(0) {
                    e.remove();
                }
            }
        }
    }
}

fn product_order(key: &[u16], orders: &[u32]) -> u32 {
    key.iter().map(|&i| orders[i as usize]).sum()
}

impl Coefficient for StatePolynomial {
    fn zero() -> Self {
        StatePolynomial::default()
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn add_assign_ref(&mut self, other: &Self) {
        for (k, c) in &other.terms {
            self.add_term(k.clone(), *c);
        }
    }

    fn mul_ref(&self, other: &Self) -> Self {
        let mut out = StatePolynomial::default();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let mut key = ka.clone();
                key.extend_from_slice(kb);
                key.sort_unstable();
                out.add_term(key, ca * cb);
            }
        }
        out
    }

    fn scale(&self, factor: Rational) -> Self {
        if factor == Rational::from_integer(0) {
            return StatePolynomial::default();
        }
        StatePolynomial { terms: self.terms.iter().map(|(k, c)| (k.clone(), c * factor)).collect() }
    }

    fn conj(&self) -> Self {
        self.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum VariableKind {
    /// running `w` or `v`
    Frequency,
    Diagonal,
    OffDiagonal,
}

/// One ansatz coefficient and the fixed operator it multiplies.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowVariable {
    pub name: String,
    pub kind: VariableKind,
    /// nominal power of the coupling carried by the coefficient
    pub order: u32,
    pub family: OperatorPolynomial<Rational>,
}

/// One product on a right-hand side, `coeff · Π y_f`.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsTerm {
    pub coeff: Rational,
    pub factors: Vec<usize>,
}

/// The coefficient ODE system of a truncated ansatz.
///
/// Variables are ordered frequencies, diagonal, off-diagonal.
#[derive(Clone, Debug)]
pub struct OdeSystem {
    pub params: FlowParameters,
    pub truncation_order: u32,
    pub variables: Vec<FlowVariable>,
    pub rhs: Vec<Vec<RhsTerm>>,
}

struct Component {
    families: Vec<usize>,
    monomials: Vec<ModeMonomial>,
}

struct Layout {
    components: Vec<Component>,
    lookup: HashMap<ModeMonomial, usize>,
}

impl Layout {
    fn new(variables: &[FlowVariable]) -> Self {
        let mut parent: Vec<usize> = (0..variables.len()).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        let mut owner: HashMap<ModeMonomial, usize> = HashMap::new();
        for (j, var) in variables.iter().enumerate() {
            for m in var.family.monomials() {
                if let Some(&other) = owner.get(m) {
                    let (a, b) = (find(&mut parent, j), find(&mut parent, other));
                    parent[a] = b;
                } else {
                    owner.insert(*m, j);
                }
            }
        }
        let mut by_root: BTreeMap<usize, usize> = BTreeMap::new();
        let mut components: Vec<Component> = Vec::new();
        for j in 0..variables.len() {
            let root = find(&mut parent, j);
            let c = *by_root.entry(root).or_insert_with(|| {
                components.push(Component { families: Vec::new(), monomials: Vec::new() });
                components.len() - 1
            });
            components[c].families.push(j);
        }
        let mut lookup = HashMap::new();
        for (c, comp) in components.iter_mut().enumerate() {
            for &j in &comp.families {
                for m in variables[j].family.monomials() {
                    if lookup.insert(*m, c).is_none() {
                        comp.monomials.push(*m);
                    }
                }
            }
        }
        Layout { components, lookup }
    }
}

/// Solves `Σ_j family_j · y_j = target` for the `y_j`, one component at a time.
fn project<C: Coefficient>(
    variables: &[FlowVariable],
    layout: &Layout,
    target: &OperatorPolynomial<C>,
) -> Result<Vec<C>, CutoffError> {
    for m in target.monomials() {
        if !layout.lookup.contains_key(m) {
            return Err(CutoffError::Orphan { mono: *m });
        }
    }
    let zero = Rational::from_integer(0);
    let mut out = vec![C::zero(); variables.len()];
    for comp in &layout.components {
        let ncol = comp.families.len();
        let mut rows: Vec<(Vec<Rational>, C)> = comp
            .monomials
            .iter()
            .map(|m| {
                let row = comp.families.iter().map(|&j| variables[j].family.coefficient(m)).collect();
                (row, target.coefficient(m))
            })
            .collect();
        let mut pivot_row = 0;
        let mut pivots = Vec::with_capacity(ncol);
        for col in 0..ncol {
            let Some(p) = (pivot_row..rows.len()).find(|&r| rows[r].0[col] != zero) else {
                continue;
            };
            rows.swap(pivot_row, p);
            let inv = Rational::from_integer(1) / rows[pivot_row].0[col];
            let (row, rhs) = &mut rows[pivot_row];
            row.iter_mut().for_each(|x| *x *= inv);
            *rhs = rhs.scale(inv);
            let (prow, prhs) = rows[pivot_row].clone();
            for (r, (row, rhs)) in rows.iter_mut().enumerate() {
                if r == pivot_row || row[col] == zero {
                    continue;
                }
                let f = row[col];
                for (x, px) in row.iter_mut().zip(&prow) {
                    *x -= f * px;
                }
                rhs.add_assign_ref(&prhs.scale(-f));
            }
            pivots.push((pivot_row, col));
            pivot_row += 1;
        }
        for (r, (_, rhs)) in rows.iter().enumerate().skip(pivot_row) {
            if !rhs.is_zero() {
                return Err(CutoffError::Inconsistent { mono: comp.monomials[r.min(comp.monomials.len() - 1)] });
            }
        }
        for (r, col) in pivots {
            out[comp.families[col]] = rows[r].1.clone();
        }
    }
    Ok(out)
}

/// `[P, Q]` keeping only products of nominal order `≤ max_order`.
fn truncated_commutator(
    p: &OperatorPolynomial<StatePolynomial>,
    q: &OperatorPolynomial<StatePolynomial>,
    orders: &[u32],
    max_order: u32,
) -> Result<OperatorPolynomial<StatePolynomial>, AlgebraError> {
    let mut out = OperatorPolynomial::zero();
    let q_orders: Vec<u32> = q.iter().map(|(_, c)| c.min_order(orders)).collect();
    for (mp, cp) in p {
        let op = cp.min_order(orders);
        for ((mq, cq), oq) in q.iter().zip(&q_orders) {
            if op + oq > max_order {
                continue;
            }
            let prod = cp.mul_truncated(cq, orders, max_order);
            if prod.is_zero() {
                continue;
            }
            for (m, k) in monomial_commutator(*mp, *mq, DEFAULT_MAX_DEGREE)? {
                out.add_term(m, prod.scale(Rational::from_integer(k)));
            }
        }
    }
    Ok(out)
}

fn symbolic_hamiltonian(
    variables: &[FlowVariable],
) -> (OperatorPolynomial<StatePolynomial>, OperatorPolynomial<StatePolynomial>) {
    let mut hd = OperatorPolynomial::zero();
    let mut hr = OperatorPolynomial::zero();
    for (j, var) in variables.iter().enumerate() {
        let part = var.family.map(|c| StatePolynomial::variable(j).scale(*c));
        if var.kind == VariableKind::OffDiagonal {
            hr.add_assign(&part);
        } else {
            hd.add_assign(&part);
        }
    }
    (hd, hr)
}

/// `d H/dℓ` with the per-target truncation applied: diagonal words keep
/// products up to the truncation order, off-diagonal words one order less.
fn truncated_flow(
    variables: &[FlowVariable],
    truncation_order: u32,
) -> Result<OperatorPolynomial<StatePolynomial>, AlgebraError> {
    let orders: Vec<u32> = variables.iter().map(|v| v.order).collect();
    let (hd, hr) = symbolic_hamiltonian(variables);
    let eta = truncated_commutator(&hd, &hr, &orders, truncation_order)?;
    let h = hd.plus(&hr);
    let raw = truncated_commutator(&eta, &h, &orders, truncation_order)?;
    Ok(raw
        .iter()
        .map(|(m, c)| {
            let limit = if m.is_diagonal() { truncation_order } else { truncation_order - 1 };
            (*m, c.truncated(&orders, limit))
        })
        .filter(|(_, c)| !c.is_zero())
        .collect())
}

fn base_variables(params: &FlowParameters) -> Vec<FlowVariable> {
    let p = |pairs: &[((u32, u32, u32, u32), i64)]| OperatorPolynomial::from_pairs(pairs);
    let mut vars = vec![
        FlowVariable {
            name: "w".into(),
            kind: VariableKind::Frequency,
            order: 0,
            family: p(&[((1, 1, 0, 0), 1)]),
        },
        FlowVariable {
            name: "v".into(),
            kind: VariableKind::Frequency,
            order: 0,
            family: p(&[((0, 0, 1, 1), 1)]),
        },
    ];
    for (i, j) in [(0, 0), (2, 0), (0, 2), (1, 1)] {
        vars.push(diagonal_variable(i, j, 2));
    }
    let families = [
        p(&[((2, 0, 1, 0), 1), ((2, 0, 0, 1), 1), ((0, 2, 1, 0), 1), ((0, 2, 0, 1), 1)]),
        p(&[((2, 0, 1, 0), 1), ((2, 0, 0, 1), -1), ((0, 2, 1, 0), -1), ((0, 2, 0, 1), 1)]),
        p(&[((1, 1, 1, 0), 1), ((1, 1, 0, 1), 1)]),
        p(&[((0, 0, 3, 0), 1), ((0, 0, 0, 3), 1)]),
        p(&[((0, 0, 2, 1), 1), ((0, 0, 1, 2), 1)]),
        p(&[((0, 0, 1, 0), 1), ((0, 0, 0, 1), 1)]),
    ];
    for (i, family) in families.into_iter().enumerate() {
        vars.push(FlowVariable {
            name: format!("x{}", i + 1),
            kind: VariableKind::OffDiagonal,
            order: 1,
            family,
        });
    }
    let _ = params;
    vars
}

fn diagonal_variable(i: u32, j: u32, order: u32) -> FlowVariable {
    FlowVariable {
        name: format!("w{i}{j}"),
        kind: VariableKind::Diagonal,
        order,
        family: OperatorPolynomial::monomial(ModeMonomial::number(i, j), Rational::from_integer(1)),
    }
}

/// Builds the ansatz for the given truncation order and derives its ODEs.
///
/// Families beyond the six cubic ones and the four quadratic diagonal ones are
/// added until every generated word has a slot.
pub fn derive_flow_odes(truncation_order: u32, params: FlowParameters) -> Result<OdeSystem, CutoffError> {
    if !(2..=4).contains(&truncation_order) {
        return Err(CutoffError::InvalidOrder(truncation_order));
    }
    let mut variables = base_variables(&params);
    loop {
        let flow = truncated_flow(&variables, truncation_order)?;
        let layout = Layout::new(&variables);
        let orders: Vec<u32> = variables.iter().map(|v| v.order).collect();
        let mut added = false;
        let mut seen = std::collections::BTreeSet::new();
        for (m, c) in &flow {
            if layout.lookup.contains_key(m) || seen.contains(&m.adjoint()) {
                continue;
            }
            seen.insert(*m);
            let order = c.min_order(&orders);
            added = true;
            if m.is_diagonal() {
                variables.push(diagonal_variable(m.k, m.m, order));
            } else {
                let count = variables.iter().filter(|v| v.kind == VariableKind::OffDiagonal).count();
                let one = Rational::from_integer(1);
                variables.push(FlowVariable {
                    name: format!("x{}", count + 1),
                    kind: VariableKind::OffDiagonal,
                    order,
                    family: [(*m, one), (m.adjoint(), one)].into_iter().collect(),
                });
            }
        }
        if !added {
            break;
        }
    }
    variables.sort_by_key(|v| v.kind);
    let system = assemble(params, truncation_order, variables)?;
    let off = system.off_diagonal_count();
    if truncation_order == 4 && off != EXPECTED_ORDER4_FAMILIES {
        log::warn!("order-4 ansatz has {off} off-diagonal families, expected about {EXPECTED_ORDER4_FAMILIES}");
    }
    Ok(system)
}

/// Derives the ODEs of a fixed ansatz; any generated word without a slot is an error.
pub fn derive_for_ansatz(
    params: FlowParameters,
    truncation_order: u32,
    variables: Vec<FlowVariable>,
) -> Result<OdeSystem, CutoffError> {
    if !(2..=4).contains(&truncation_order) {
        return Err(CutoffError::InvalidOrder(truncation_order));
    }
    assemble(params, truncation_order, variables)
}

fn assemble(params: FlowParameters, truncation_order: u32, variables: Vec<FlowVariable>) -> Result<OdeSystem, CutoffError> {
    let flow = truncated_flow(&variables, truncation_order)?;
    let layout = Layout::new(&variables);
    let derivatives = project(&variables, &layout, &flow)?;
    let rhs = derivatives
        .iter()
        .map(|poly| {
            poly.iter()
                .map(|(k, c)| RhsTerm { coeff: *c, factors: k.iter().map(|&i| i as usize).collect() })
                .collect()
        })
        .collect();
    Ok(OdeSystem { params, truncation_order, variables, rhs })
}

/// Point of the flow with unscaled coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CutoffState {
    pub ell: f64,
    pub w: f64,
    pub v: f64,
    /// off-diagonal coefficients in system order
    pub x: Vec<f64>,
    /// diagonal coefficients `w_ij` in system order
    pub w_ij: Vec<f64>,
}

impl CutoffState {
    fn from_flat(ell: f64, y: &[f64], n_diag: usize) -> Self {
        CutoffState { ell, w: y[0], v: y[1], w_ij: y[2..2 + n_diag].to_vec(), x: y[2 + n_diag..].to_vec() }
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut y = vec![self.w, self.v];
        y.extend_from_slice(&self.w_ij);
        y.extend_from_slice(&self.x);
        y
    }

    pub fn off_diagonal_norm(&self) -> f64 {
        self.x.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Values in the column order of [`OdeSystem::column_names`].
    pub fn row(&self) -> Vec<f64> {
        let mut r = vec![self.ell, self.w, self.v];
        r.extend_from_slice(&self.x);
        r.extend_from_slice(&self.w_ij);
        r
    }
}

/// Sampled flow, one state per accepted integrator step.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub x_names: Vec<String>,
    pub states: Vec<CutoffState>,
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub final_state: CutoffState,
    /// `w(∞) − w(0)` and `v(∞) − v(0)` without cancellation against the bare values
    pub frequency_shift: [f64; 2],
    pub trajectory: Trajectory,
}

impl OdeSystem {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn off_diagonal_count(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VariableKind::OffDiagonal).count()
    }

    pub fn diagonal_count(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VariableKind::Diagonal).count()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    fn off_names(&self) -> Vec<String> {
        self.kind_names(VariableKind::OffDiagonal)
    }

    fn kind_names(&self, kind: VariableKind) -> Vec<String> {
        self.variables.iter().filter(|v| v.kind == kind).map(|v| v.name.clone()).collect()
    }

    /// `ℓ, w, v, x…, w_ij…`
    pub fn column_names(&self) -> Vec<String> {
        let mut names = vec!["ell".to_string(), "w".into(), "v".into()];
        names.extend(self.off_names());
        names.extend(self.kind_names(VariableKind::Diagonal));
        names
    }

    /// Right-hand sides in unscaled variables.
    pub fn evaluate(&self, y: &[f64], out: &mut [f64]) {
        for (dst, terms) in out.iter_mut().zip(&self.rhs) {
            *dst = terms
                .iter()
                .map(|t| rational_to_f64(t.coeff) * t.factors.iter().map(|&f| y[f]).product::<f64>())
                .sum();
        }
    }

    /// The Hamiltonian at `ℓ = 0` projected onto the ansatz.
    pub fn initial_state(&self) -> Result<CutoffState, CutoffError> {
        let hh = build_henon_heiles(self.params, false);
        let mut h = hh.free.to_f64();
        h.add_assign(&hh.interaction.to_f64().map(|c| c * hh.coupling));
        let y = project(&self.variables, &Layout::new(&self.variables), &h)?;
        Ok(CutoffState::from_flat(0.0, &y, self.diagonal_count()))
    }

    /// Diagonal operator of a state, zero-point constant included.
    pub fn normal_form(&self, state: &CutoffState) -> OperatorPolynomial<f64> {
        let y = state.to_flat();
        let mut out: OperatorPolynomial<f64> = self
            .variables
            .iter()
            .zip(&y)
            .filter(|(var, _)| var.kind != VariableKind::OffDiagonal)
            .fold(OperatorPolynomial::zero(), |mut acc, (var, c)| {
                acc.add_assign(&var.family.to_f64().map(|f| f * c));
                acc
            });
        out.add_term(ModeMonomial::IDENTITY, rational_to_f64(self.params.zero_point()));
        out
    }
}

/// Integrates the coefficient flow until `‖x‖∞ < tolerance` or `ℓ = ell_max`.
///
/// Internally every coefficient is divided by `g^order`, and `w`, `v` are
/// carried as their initial value plus a shift divided by `g²`, so that all
/// variables are of order one; the norm test applies to these scaled values.
pub fn integrate_flow(
    system: &OdeSystem,
    init: &CutoffState,
    tolerance: f64,
    ell_max: f64,
) -> Result<FlowResult, CutoffError> {
    if !(tolerance > 0.0 && tolerance.is_finite()) {
        return Err(CutoffError::InvalidTolerance);
    }
    let n = system.len();
    let y_init = init.to_flat();
    if y_init.len() != n {
        return Err(CutoffError::Layout { expected: n, got: y_init.len() });
    }
    let g = system.params.coupling();
    let s = if g == 0.0 { 1.0 } else { g };
    let (offset, scale): (Vec<f64>, Vec<f64>) = system
        .variables
        .iter()
        .zip(&y_init)
        .map(|(v, y)| match v.kind {
            VariableKind::Frequency => (*y, s * s),
            _ => (0.0, s.powi(v.order as i32)),
        })
        .unzip();
    let compiled: Vec<Vec<(f64, Vec<usize>)>> = system
        .rhs
        .iter()
        .map(|terms| terms.iter().map(|t| (rational_to_f64(t.coeff), t.factors.clone())).collect())
        .collect();
    let off_start = 2 + system.diagonal_count();
    let y0: Vec<f64> = y_init.iter().zip(offset.iter().zip(&scale)).map(|(y, (o, s))| (y - o) / s).collect();
    let n_diag = system.diagonal_count();
    let expand = |yh: &[f64], out: &mut [f64]| {
        for (i, dst) in out.iter_mut().enumerate() {
            *dst = offset[i] + scale[i] * yh[i];
        }
    };
    let unscale = |ell: f64, yh: &[f64]| {
        let mut y = vec![0.0; yh.len()];
        expand(yh, &mut y);
        CutoffState::from_flat(ell, &y, n_diag)
    };
    let residual = |yh: &[f64]| yh[off_start..].iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut full = vec![0.0; n];

    let mut states = Vec::new();
    let solver = Rk45 { h_max: 0.1, max_steps: STEP_BUDGET, ..Rk45::default() };
    let outcome = solver.integrate(
        |_, yh, out| {
            expand(yh, &mut full);
            for ((dst, terms), sc) in out.iter_mut().zip(&compiled).zip(&scale) {
                *dst = terms.iter().map(|(c, f)| c * f.iter().map(|&i| full[i]).product::<f64>()).sum::<f64>() / sc;
            }
        },
        init.ell,
        &y0,
        ell_max,
        |t, y| {
            states.push(unscale(t, y));
            residual(y) < tolerance
        },
    )?;
    let final_state = unscale(outcome.t, &outcome.y);
    let frequency_shift = [scale[0] * outcome.y[0], scale[1] * outcome.y[1]];
    if outcome.termination != Termination::Stopped {
        return Err(CutoffError::NotConverged { ell: outcome.t, residual: residual(&outcome.y) });
    }
    if !(final_state.w > 0.0 && final_state.v > 0.0) {
        return Err(CutoffError::FrequencyCollapse { w: final_state.w, v: final_state.v });
    }
    Ok(FlowResult { final_state, frequency_shift, trajectory: Trajectory { x_names: system.off_names(), states } })
}

/// Derives, initializes and integrates with the default tolerance and horizon.
pub fn run_cutoff(params: FlowParameters, truncation_order: u32) -> Result<(OdeSystem, FlowResult), CutoffError> {
    let system = derive_flow_odes(truncation_order, params)?;
    let init = system.initial_state()?;
    let result = integrate_flow(&system, &init, DEFAULT_TOLERANCE, DEFAULT_ELL_MAX)?;
    Ok((system, result))
}

/// Fitted exponential decay of one coefficient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayRate {
    Rate(f64),
    /// too few samples above the noise floor
    BelowFloor,
}

/// Least-squares slope of `−log|x|` against `ℓ` on samples with
/// `|x| ∈ [1e-9, 1e-3] · max|x|`, after any transient.
pub fn fit_decay_rate(ells: &[f64], values: &[f64]) -> DecayRate {
    let peak = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak < 1e-300 {
        return DecayRate::BelowFloor;
    }
    let pts: Vec<(f64, f64)> = ells
        .iter()
        .zip(values)
        .filter(|(_, x)| {
            let r = x.abs() / peak;
            (1e-9..=1e-3).contains(&r)
        })
        .map(|(l, x)| (*l, x.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return DecayRate::BelowFloor;
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
    if sxx == 0.0 {
        return DecayRate::BelowFloor;
    }
    DecayRate::Rate(-sxy / sxx)
}

/// Decay rate of every off-diagonal coefficient on the trajectory tail.
pub fn asymptotic_decay_rates(trajectory: &Trajectory) -> BTreeMap<String, DecayRate> {
    let ells: Vec<f64> = trajectory.states.iter().map(|s| s.ell).collect();
    trajectory
        .x_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let xs: Vec<f64> = trajectory.states.iter().map(|s| s.x[i]).collect();
            (name.clone(), fit_decay_rate(&ells, &xs))
        })
        .collect()
}
