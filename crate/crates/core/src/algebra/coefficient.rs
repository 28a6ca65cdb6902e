use std::fmt::Debug;

use num_complex::Complex64;
use num_traits::{ToPrimitive, Zero};

use super::Rational;

/// Ring operations an [`OperatorPolynomial`](super::OperatorPolynomial) needs from its
/// coefficients.
pub trait Coefficient: Clone + Debug + PartialEq + Send + Sync {
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn add_assign_ref(&mut self, other: &Self);
    fn mul_ref(&self, other: &Self) -> Self;
    fn scale(&self, factor: Rational) -> Self;
    fn conj(&self) -> Self;

    fn neg(&self) -> Self {
        self.scale(Rational::from_integer(-1))
    }
}

/// Coefficients that evaluate to a number.
pub trait Numeric: Coefficient {
    fn to_complex(&self) -> Complex64;
}

/// Coefficients that evaluate to a real number.
pub trait RealNumeric: Numeric {
    fn to_f64(&self) -> f64;
}

impl Coefficient for Rational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += *other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: Rational) -> Self {
        self * factor
    }
    fn conj(&self) -> Self {
        *self
    }
}

impl Numeric for Rational {
    fn to_complex(&self) -> Complex64 {
        Complex64::new(rational_to_f64(*self), 0.0)
    }
}

impl RealNumeric for Rational {
    fn to_f64(&self) -> f64 {
        rational_to_f64(*self)
    }
}

pub fn rational_to_f64(r: Rational) -> f64 {
    ToPrimitive::to_f64(&r).unwrap_or_else(|| *r.numer() as f64 / *r.denom() as f64)
}

impl Coefficient for f64 {
    fn zero() -> Self {
        0.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: Rational) -> Self {
        self * rational_to_f64(factor)
    }
    fn conj(&self) -> Self {
        *self
    }
}

impl Numeric for f64 {
    fn to_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
}

impl RealNumeric for f64 {
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Coefficient for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }
    fn mul_ref(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, factor: Rational) -> Self {
        self * rational_to_f64(factor)
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
}

impl Numeric for Complex64 {
    fn to_complex(&self) -> Complex64 {
        *self
    }
}
