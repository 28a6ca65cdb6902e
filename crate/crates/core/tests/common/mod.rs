#![allow(dead_code)]

use henon_flow::algebra::{real_matrix_representation, ModeMonomial, OperatorPolynomial, Rational};
use proptest::prelude::*;

/// Per-mode size of the matrix oracle.
pub const ORACLE_SIZE: usize = 12;
/// Highest occupation whose column stays exact for products of two sampled words.
pub const ORACLE_INTERIOR: u32 = 7;

pub fn word() -> impl Strategy<Value = ModeMonomial> {
    (0u32..=2, 0u32..=2, 0u32..=2, 0u32..=2)
        .prop_map(|(k, r, m, n)| ModeMonomial::new(k, r, m, n))
        .prop_filter("degree at most 4", |m| m.degree() <= 4)
}

pub fn polynomial() -> impl Strategy<Value = OperatorPolynomial<Rational>> {
    prop::collection::vec((word(), -6i64..=6, 1i64..=4), 1..=3).prop_map(|terms| {
        terms.into_iter().map(|(m, p, q)| (m, Rational::new(p, q))).collect()
    })
}

pub fn hermitian() -> impl Strategy<Value = OperatorPolynomial<Rational>> {
    polynomial().prop_map(|p| p.plus(&p.adjoint()))
}

pub fn frequency() -> impl Strategy<Value = Rational> {
    (1i64..=20, 1i64..=10).prop_map(|(p, q)| Rational::new(p, q))
}

/// `[A, B]` against `MA·MB − MB·MA` on the exact interior columns, entrywise
/// relative to `|MA|·|MB| + |MB|·|MA|`.
pub fn commutator_matches_oracle(a: &OperatorPolynomial<Rational>, b: &OperatorPolynomial<Rational>) -> Result<(), String> {
    let c = a.commutator(b).map_err(|e| e.to_string())?;
    let n = ORACLE_SIZE;
    let ma = real_matrix_representation(a, n, n).map_err(|e| e.to_string())?;
    let mb = real_matrix_representation(b, n, n).map_err(|e| e.to_string())?;
    let mc = real_matrix_representation(&c, n, n).map_err(|e| e.to_string())?;
    let oracle = &ma * &mb - &mb * &ma;
    let (aa, ab) = (ma.abs(), mb.abs());
    let magnitude = &aa * &ab + &ab * &aa;
    for n1 in 0..=ORACLE_INTERIOR {
        for n2 in 0..=ORACLE_INTERIOR {
            let col = n1 as usize * n + n2 as usize;
            for row in 0..n * n {
                let (x, y) = (mc[(row, col)], oracle[(row, col)]);
                if (x - y).abs() > 1e-12 * magnitude[(row, col)].max(1.0) {
                    return Err(format!("entry ({row},{col}): symbolic {x} vs matrix {y}"));
                }
            }
        }
    }
    Ok(())
}

pub fn jacobi_identity(
    a: &OperatorPolynomial<Rational>,
    b: &OperatorPolynomial<Rational>,
    c: &OperatorPolynomial<Rational>,
) -> Result<(), String> {
    let cyc = |x: &OperatorPolynomial<Rational>, y: &OperatorPolynomial<Rational>, z: &OperatorPolynomial<Rational>| {
        x.commutator(&y.commutator(z).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    };
    let sum = cyc(a, b, c)?.plus(&cyc(b, c, a)?).plus(&cyc(c, a, b)?);
    if sum.is_zero() {
        Ok(())
    } else {
        Err(format!("cyclic sum has {} surviving words", sum.len()))
    }
}

/// Hermitian inputs give an anti-Hermitian commutator and a Hermitian anticommutator.
pub fn hermiticity_preserved(a: &OperatorPolynomial<Rational>, b: &OperatorPolynomial<Rational>) -> Result<(), String> {
    let c = a.commutator(b).map_err(|e| e.to_string())?;
    if c.adjoint() != c.neg() {
        return Err("commutator of Hermitian operators is not anti-Hermitian".into());
    }
    let anti = a.mul(b).map_err(|e| e.to_string())?.plus(&b.mul(a).map_err(|e| e.to_string())?);
    if !anti.is_hermitian() && !anti.is_zero() {
        return Err("anticommutator of Hermitian operators is not Hermitian".into());
    }
    Ok(())
}

/// `[[H₀, T], H₀] = −ε_T T` with `H₀ = w a†a + v b†b`.
pub fn eigenoperator_identity(t: ModeMonomial, w: Rational, v: Rational) -> Result<(), String> {
    let h0: OperatorPolynomial<Rational> = [(ModeMonomial::number(1, 0), w), (ModeMonomial::number(0, 1), v)].into_iter().collect();
    let tp = OperatorPolynomial::monomial(t, Rational::from_integer(1));
    let lhs = h0.commutator(&tp).and_then(|x| x.commutator(&h0)).map_err(|e| e.to_string())?;
    let rhs = tp.scale(-t.epsilon(w, v));
    if lhs == rhs {
        Ok(())
    } else {
        Err(format!("{t}: {lhs:?} ≠ {rhs:?}"))
    }
}

use henon_flow::algebra::{fock_index, FlowParameters};
use henon_flow::baseline::{diagonalize, TruncatedSpectrum};
use num_complex::Complex64;

/// Exact evolution of one bare Fock state, kept as its eigenbasis expansion.
pub struct SpectralOracle {
    pub spectrum: TruncatedSpectrum,
    pub size: usize,
    /// eigenstates with non-negligible overlap and the overlap itself
    support: Vec<(usize, f64)>,
}

impl SpectralOracle {
    pub fn new(params: FlowParameters, size: usize, initial: (u32, u32)) -> Self {
        let spectrum = diagonalize(params, size, size).unwrap();
        let row = fock_index(initial.0, initial.1, size);
        let support = (0..spectrum.dimension())
            .map(|i| (i, spectrum.eigenvectors[(row, i)]))
            .filter(|(_, c)| c.abs() > 1e-13)
            .collect();
        SpectralOracle { spectrum, size, support }
    }

    /// `⟨β| e^{iHt} |initial⟩` for the bare Fock state `β`.
    pub fn amplitude(&self, beta: (u32, u32), t: f64) -> Complex64 {
        let row = fock_index(beta.0, beta.1, self.size);
        self.support
            .iter()
            .map(|&(i, c)| Complex64::from_polar(c * self.spectrum.eigenvectors[(row, i)], self.spectrum.eigenvalues[i] * t))
            .sum()
    }

    /// Matrix of a bare operator between the supported eigenstates.
    pub fn restrict(&self, op: &henon_flow::algebra::OperatorPolynomial<f64>) -> nalgebra::DMatrix<f64> {
        let full = henon_flow::algebra::real_matrix_representation(op, self.size, self.size).unwrap();
        let cols: Vec<usize> = self.support.iter().map(|(i, _)| *i).collect();
        let v = self.spectrum.eigenvectors.select_columns(&cols);
        v.transpose() * full * v
    }

    /// `⟨ψ(t)| O |ψ(t)⟩` with `O` restricted by [`Self::restrict`].
    pub fn expectation(&self, restricted: &nalgebra::DMatrix<f64>, t: f64) -> f64 {
        let amp: Vec<Complex64> = self
            .support
            .iter()
            .map(|&(i, c)| Complex64::from_polar(c, self.spectrum.eigenvalues[i] * t))
            .collect();
        let mut s = Complex64::new(0.0, 0.0);
        for (a, x) in amp.iter().enumerate() {
            for (b, y) in amp.iter().enumerate() {
                s += x.conj() * restricted[(a, b)] * y;
            }
        }
        s.re
    }
}
