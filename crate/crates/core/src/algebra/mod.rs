//! Exact normal-ordered algebra of two bosonic modes `a`, `b`.

mod coefficient;
mod hamiltonian;
mod matrix;
mod monomial;
mod polynomial;
mod text;

use thiserror::Error;

pub use coefficient::{rational_to_f64, Coefficient, Numeric, RealNumeric};
pub use hamiltonian::{build_henon_heiles, coupling_for, parse_rational, FlowParameters, HenonHeiles};
pub use matrix::{fock_index, matrix_representation, real_matrix_representation, MAX_DENSE_DIMENSION};
pub use monomial::{
    falling_factorial, monomial_commutator, normal_order, normal_order_with_limit, ModeMonomial,
    DEFAULT_MAX_DEGREE,
};
pub use polynomial::OperatorPolynomial;
pub use text::TextCoefficient;

/// Exact rational numbers used for frequencies, decay rates and algebra coefficients.
pub type Rational = num_rational::Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("operator word of degree {degree} exceeds the limit {limit}")]
    WordTooLong { degree: u32, limit: u32 },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error: {0}")]
    Parse(String),
}
