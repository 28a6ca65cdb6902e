use std::fmt;

use super::{AlgebraError, Rational};

/// Default cap on the total degree of a normal-ordered word.
pub const DEFAULT_MAX_DEGREE: u32 = 12;

/// Normal-ordered two-mode word `a†^k a^r b†^m b^n`.
///
/// The derived ordering compares `(k, r, m, n)` lexicographically, which fixes
/// the canonical order of terms inside an [`OperatorPolynomial`](super::OperatorPolynomial).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeMonomial {
    pub k: u32,
    pub r: u32,
    pub m: u32,
    pub n: u32,
}

impl ModeMonomial {
    pub const IDENTITY: ModeMonomial = ModeMonomial { k: 0, r: 0, m: 0, n: 0 };

    pub const fn new(k: u32, r: u32, m: u32, n: u32) -> Self {
        ModeMonomial { k, r, m, n }
    }

    /// `a†`
    pub const fn a_dag() -> Self {
        Self::new(1, 0, 0, 0)
    }

    /// `a`
    pub const fn a() -> Self {
        Self::new(0, 1, 0, 0)
    }

    /// `b†`
    pub const fn b_dag() -> Self {
        Self::new(0, 0, 1, 0)
    }

    /// `b`
    pub const fn b() -> Self {
        Self::new(0, 0, 0, 1)
    }

    /// `a†^i a^i b†^j b^j`
    pub const fn number(i: u32, j: u32) -> Self {
        Self::new(i, i, j, j)
    }

    pub fn degree(&self) -> u32 {
        self.k + self.r + self.m + self.n
    }

    /// Net quanta moved in each mode, `(k - r, m - n)`.
    pub fn grading(&self) -> (i64, i64) {
        (self.k as i64 - self.r as i64, self.m as i64 - self.n as i64)
    }

    pub fn is_diagonal(&self) -> bool {
        self.k == self.r && self.m == self.n
    }

    /// Monomial of the Hermitian adjoint word.
    pub fn adjoint(&self) -> Self {
        Self::new(self.r, self.k, self.n, self.m)
    }

    /// `ω = (k - r) w + (m - n) v`, the eigenvalue of `[H₀, ·]` on this word.
    pub fn eigenfrequency(&self, w: Rational, v: Rational) -> Rational {
        let (da, db) = self.grading();
        Rational::from_integer(da) * w + Rational::from_integer(db) * v
    }

    /// `ε = ω²`, the decay rate of this word under `[[H₀, ·], H₀]`.
    pub fn epsilon(&self, w: Rational, v: Rational) -> Rational {
        let omega = self.eigenfrequency(w, v);
        omega * omega
    }

    /// Action on the Fock state `|n1, n2⟩`.
    ///
    /// Returns the target occupation numbers and the ladder matrix element, or
    /// `None` when an annihilator empties a mode.
    pub fn act_on(&self, n1: u32, n2: u32) -> Option<(u32, u32, f64)> {
        if self.r > n1 || self.n > n2 {
            return None;
        }
        let mid1 = n1 - self.r;
        let mid2 = n2 - self.n;
        let out1 = mid1 + self.k;
        let out2 = mid2 + self.m;
        // √(n1!/mid1!) √(out1!/mid1!) and likewise for the b-mode
        let amp = (ladder_ratio(n1, mid1) * ladder_ratio(out1, mid1)
            * ladder_ratio(n2, mid2)
            * ladder_ratio(out2, mid2))
        .sqrt();
        Some((out1, out2, amp))
    }
}

/// `hi! / lo!` as a float, `hi >= lo`.
fn ladder_ratio(hi: u32, lo: u32) -> f64 {
    ((lo + 1)..=hi).map(|x| x as f64).product()
}

impl fmt::Display for ModeMonomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Self::IDENTITY {
            return write!(f, "1");
        }
        let mut parts = Vec::new();
        for (sym, pow) in [("a†", self.k), ("a", self.r), ("b†", self.m), ("b", self.n)] {
            match pow {
                0 => {}
                1 => parts.push(sym.to_string()),
                p => parts.push(format!("{sym}^{p}")),
            }
        }
        write!(f, "{}", parts.join(" "))
    }
}

pub(crate) fn binomial(n: u32, k: u32) -> i64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: i64 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i64 / (i + 1) as i64;
    }
    acc
}

pub(crate) fn factorial(n: u32) -> i64 {
    (1..=n as i64).product()
}

/// Falling factorial `n (n-1) ⋯ (n-k+1)`, the eigenvalue of `a†^k a^k` on `|n⟩`.
pub fn falling_factorial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    ((n - k + 1)..=n).map(|x| x as f64).product()
}

/// Normal-ordered expansion of the product `left · right`.
///
/// Uses `a^r a†^k = Σ_j C(r,j) C(k,j) j! a†^(k-j) a^(r-j)` in each mode.
pub fn normal_order(
    left: ModeMonomial,
    right: ModeMonomial,
) -> Result<Vec<(ModeMonomial, i64)>, AlgebraError> {
    normal_order_with_limit(left, right, DEFAULT_MAX_DEGREE)
}

pub fn normal_order_with_limit(
    left: ModeMonomial,
    right: ModeMonomial,
    max_degree: u32,
) -> Result<Vec<(ModeMonomial, i64)>, AlgebraError> {
    let degree = left.degree() + right.degree();
    if degree > max_degree {
        return Err(AlgebraError::WordTooLong { degree, limit: max_degree });
    }
    let ja = left.r.min(right.k);
    let jb = left.n.min(right.m);
    let mut out = Vec::with_capacity(((ja + 1) * (jb + 1)) as usize);
    for i in 0..=ja {
        let ca = binomial(left.r, i) * binomial(right.k, i) * factorial(i);
        for j in 0..=jb {
            let cb = binomial(left.n, j) * binomial(right.m, j) * factorial(j);
            out.push((
                ModeMonomial::new(
                    left.k + right.k - i,
                    left.r + right.r - i,
                    left.m + right.m - j,
                    left.n + right.n - j,
                ),
                ca * cb,
            ));
        }
    }
    Ok(out)
}

/// `[left, right]` for two words, zero terms removed.
pub fn monomial_commutator(
    left: ModeMonomial,
    right: ModeMonomial,
    max_degree: u32,
) -> Result<Vec<(ModeMonomial, i64)>, AlgebraError> {
    let mut acc: std::collections::BTreeMap<ModeMonomial, i64> = Default::default();
    for (m, c) in normal_order_with_limit(left, right, max_degree)? {
        *acc.entry(m).or_default() += c;
    }
    for (m, c) in normal_order_with_limit(right, left, max_degree)? {
        *acc.entry(m).or_default() -= c;
    }
    Ok(acc.into_iter().filter(|(_, c)| *c != 0).collect())
}
