//! Eigenvalue tables from a diagonal normal form, with block diagonalization
//! of the degenerate shells that survive in the commensurate case.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{falling_factorial, FlowParameters, ModeMonomial, OperatorPolynomial};
use crate::baseline::{self, BaselineError, REFERENCE_BASIS};
use crate::cutoff::{self, CutoffError};
use crate::iterative::{self, IterativeError};

/// Largest matrix [`jacobi_eigen`] accepts.
pub const MAX_JACOBI_DIMENSION: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("normal form contains the off-diagonal word {0}")]
    NotDiagonal(ModeMonomial),
    #[error("state is unshifted by the coupling, relative error undefined")]
    Unshifted,
    #[error("matrix of dimension {0} is too large for the Jacobi solver")]
    TooLarge(usize),
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error(transparent)]
    Iterative(#[from] IterativeError),
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
}

/// How a spectrum was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// cut-off flow at the given truncation order
    Cutoff(u32),
    /// iterative flow to order K, diagonal part only
    Iterative(usize),
    /// iterative flow to order K with degenerate shells diagonalized
    Improved(usize),
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Cutoff(n) => write!(f, "cutoff-{n}"),
            Method::Iterative(k) => write!(f, "iter-{k}"),
            Method::Improved(k) => write!(f, "improved-{k}"),
            Method::Baseline => write!(f, "baseline"),
        }
    }
}

impl FromStr for Method {
    type Err = SpectrumError;

    /// Accepts `cutoff-N`, `iter-K`, `improved` (order 6), `improved-K`, `baseline`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SpectrumError::UnknownMethod(s.to_string());
        let (name, arg) = match s.split_once('-') {
            Some((n, a)) => (n, Some(a.parse::<usize>().map_err(|_| bad())?)),
            None => (s, None),
        };
        match (name, arg) {
            ("cutoff", Some(n)) => Ok(Method::Cutoff(n as u32)),
            ("iter", Some(k)) => Ok(Method::Iterative(k)),
            ("improved", k) => Ok(Method::Improved(k.unwrap_or(6))),
            ("baseline", None) => Ok(Method::Baseline),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumEntry {
    pub n1: u32,
    pub n2: u32,
    pub energy: f64,
    pub method: Method,
    /// `w(n1+½) + v(n2+½)`
    pub e_free: f64,
    /// `false` when the label is only a weak dominant component
    pub confident: bool,
    /// matched reference energy, if joined
    pub numerical: Option<f64>,
    /// relative error in percent against `numerical`
    pub delta: Option<f64>,
}

/// `Σ c · FF(n1, k) · FF(n2, m)` over the words `a†^k a^k b†^m b^m` of `diag`.
pub fn eigenvalue_from_normal_form(diag: &OperatorPolynomial<f64>, n1: u32, n2: u32) -> Result<f64, SpectrumError> {
    let mut e = 0.0;
    for (m, c) in diag {
        if !m.is_diagonal() {
            return Err(SpectrumError::NotDiagonal(*m));
        }
        e += c * falling_factorial(n1, m.k) * falling_factorial(n2, m.m);
    }
    Ok(e)
}

/// `|(e_method − e_baseline)/(e_baseline − e_free)| · 100`.
pub fn relative_error(e_method: f64, e_baseline: f64, e_free: f64) -> Result<f64, SpectrumError> {
    let shift = e_baseline - e_free;
    if shift == 0.0 {
        return Err(SpectrumError::Unshifted);
    }
    Ok(((e_method - e_baseline) / shift).abs() * 100.0)
}

/// Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues ascending and the matching eigenvectors as columns
/// (`vectors[row][col]`).
pub fn jacobi_eigen(matrix: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>), SpectrumError> {
    let n = matrix.len();
    if n > MAX_JACOBI_DIMENSION {
        return Err(SpectrumError::TooLarge(n));
    }
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j].powi(2)).sum();
        let scale: f64 = (0..n).map(|i| a[i][i].powi(2)).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[x][x].total_cmp(&a[y][y]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = (0..n).map(|r| order.iter().map(|&c| v[r][c]).collect()).collect();
    Ok((values, vectors))
}

/// One eigenvalue of a shell block with its dominant basis state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellLevel {
    pub energy: f64,
    pub n1: u32,
    pub n2: u32,
    pub weight: f64,
}

/// Matrix of `h` on the shell `n1 + n2 = shell`, basis ordered `n1 = shell … 0`.
pub fn shell_matrix(h: &OperatorPolynomial<f64>, shell: u32) -> Vec<Vec<f64>> {
    let dim = shell as usize + 1;
    let mut mat = vec![vec![0.0; dim]; dim];
    for (col, n1) in (0..=shell).rev().enumerate() {
        let n2 = shell - n1;
        for (m, c) in h {
            if let Some((o1, o2, amp)) = m.act_on(n1, n2) {
                if o1 + o2 == shell {
                    mat[(shell - o1) as usize][col] += c * amp;
                }
            }
        }
    }
    mat
}

/// Eigenvalues of `h` restricted to the shell, ascending, each labelled by its
/// dominant component (ties go to the larger `n1`).
pub fn degenerate_block_improve(h: &OperatorPolynomial<f64>, shell: u32) -> Result<Vec<ShellLevel>, SpectrumError> {
    let mat = shell_matrix(h, shell);
    let (values, vectors) = jacobi_eigen(&mat)?;
    Ok(values
        .iter()
        .enumerate()
        .map(|(c, e)| {
            let (row, weight) = (0..vectors.len()).fold((0, -1.0), |best, r| {
                let w = vectors[r][c].powi(2);
                if w > best.1 + 1e-12 {
                    (r, w)
                } else {
                    best
                }
            });
            let n1 = shell - row as u32;
            ShellLevel { energy: *e, n1, n2: shell - n1, weight }
        })
        .collect())
}

fn entries_from_normal_form(
    params: &FlowParameters,
    diag: &OperatorPolynomial<f64>,
    method: Method,
    count: usize,
) -> Result<Vec<SpectrumEntry>, SpectrumError> {
    let span = count as u32 + 1;
    let states: Vec<(u32, u32)> = (0..span).flat_map(|a| (0..span).map(move |b| (a, b))).collect();
    let mut entries = states
        .par_iter()
        .map(|&(n1, n2)| {
            Ok(SpectrumEntry {
                n1,
                n2,
                energy: eigenvalue_from_normal_form(diag, n1, n2)?,
                method,
                e_free: params.free_energy(n1, n2),
                confident: true,
                numerical: None,
                delta: None,
            })
        })
        .collect::<Result<Vec<_>, SpectrumError>>()?;
    entries.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    entries.truncate(count);
    Ok(entries)
}

/// The `count` lowest levels of `params` computed with `method`, sorted by energy.
pub fn spectrum_table(params: FlowParameters, method: Method, count: usize) -> Result<Vec<SpectrumEntry>, SpectrumError> {
    match method {
        Method::Cutoff(order) => {
            let (system, flow) = cutoff::run_cutoff(params, order)?;
            entries_from_normal_form(&params, &system.normal_form(&flow.final_state), method, count)
        }
        Method::Iterative(k) => {
            let sol = iterative::iterate_flow(params, k)?;
            entries_from_normal_form(&params, &sol.normal_form(), method, count)
        }
        Method::Improved(k) => {
            let sol = iterative::iterate_flow(params, k)?;
            let h = sol.hamiltonian_at_infinity(k);
            let mut entries = Vec::new();
            let mut shell = 0;
            // shells are ordered in energy up to small overlaps; one spare shell covers those
            while entries.len() < count + (shell as usize + 1) && shell <= count as u32 {
                for level in degenerate_block_improve(&h, shell)? {
                    entries.push(SpectrumEntry {
                        n1: level.n1,
                        n2: level.n2,
                        energy: level.energy,
                        method,
                        e_free: params.free_energy(level.n1, level.n2),
                        confident: true,
                        numerical: None,
                        delta: None,
                    });
                }
                shell += 1;
            }
            entries.sort_by(|a, b| a.energy.total_cmp(&b.energy));
            entries.truncate(count);
            Ok(entries)
        }
        Method::Baseline => {
            let spec = baseline::diagonalize(params, REFERENCE_BASIS, REFERENCE_BASIS)?;
            Ok(spec
                .eigenvalues
                .iter()
                .zip(&spec.labels)
                .take(count)
                .map(|(e, l)| SpectrumEntry {
                    n1: l.n1,
                    n2: l.n2,
                    energy: *e,
                    method,
                    e_free: params.free_energy(l.n1, l.n2),
                    confident: l.is_confident(),
                    numerical: Some(*e),
                    delta: None,
                })
                .collect())
        }
    }
}

/// Fills `numerical` and `delta` from confidently labelled reference entries.
pub fn attach_reference(entries: &mut [SpectrumEntry], reference: &[SpectrumEntry]) {
    for e in entries.iter_mut() {
        if let Some(r) = reference.iter().find(|r| r.confident && r.n1 == e.n1 && r.n2 == e.n2) {
            e.numerical = Some(r.energy);
            e.delta = relative_error(e.energy, r.energy, e.e_free).ok();
        }
    }
}
