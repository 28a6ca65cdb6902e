use nalgebra::DMatrix;
use num_complex::Complex64;

use super::coefficient::{Numeric, RealNumeric};
use super::{AlgebraError, OperatorPolynomial};

/// Largest product-basis dimension accepted by the dense representations.
pub const MAX_DENSE_DIMENSION: usize = 16_384;

/// Row/column index of `|n1, n2⟩` in an `n1_max × n2_max` product basis.
pub fn fock_index(n1: u32, n2: u32, size2: usize) -> usize {
    n1 as usize * size2 + n2 as usize
}

fn check_dims(size1: usize, size2: usize) -> Result<usize, AlgebraError> {
    if size1 == 0 || size2 == 0 {
        return Err(AlgebraError::Dimension(format!("basis sizes must be ≥ 1, got {size1}×{size2}")));
    }
    size1
        .checked_mul(size2)
        .filter(|d| *d <= MAX_DENSE_DIMENSION)
        .ok_or_else(|| AlgebraError::Dimension(format!("{size1}×{size2} exceeds {MAX_DENSE_DIMENSION}")))
}

fn fill<C, T>(
    poly: &OperatorPolynomial<C>,
    size1: usize,
    size2: usize,
    value: impl Fn(&C) -> T,
    zero: T,
) -> Result<DMatrix<T>, AlgebraError>
where
    C: Numeric,
    T: nalgebra::Scalar + Copy + std::ops::AddAssign + std::ops::Mul<f64, Output = T>,
{
    let dim = check_dims(size1, size2)?;
    let mut mat = DMatrix::from_element(dim, dim, zero);
    for (mono, c) in poly {
        let c = value(c);
        for n1 in 0..size1 as u32 {
            for n2 in 0..size2 as u32 {
                if let Some((o1, o2, amp)) = mono.act_on(n1, n2) {
                    if (o1 as usize) < size1 && (o2 as usize) < size2 {
                        mat[(fock_index(o1, o2, size2), fock_index(n1, n2, size2))] += c * amp;
                    }
                }
            }
        }
    }
    Ok(mat)
}

/// Matrix of `poly` in the product Fock basis `|n1, n2⟩`, `n1 < size1`,
/// `n2 < size2`, ordered with `n2` running fastest.
///
/// Matrix elements leaving the truncated space are dropped.
pub fn matrix_representation<C: Numeric>(
    poly: &OperatorPolynomial<C>,
    size1: usize,
    size2: usize,
) -> Result<DMatrix<Complex64>, AlgebraError> {
    fill(poly, size1, size2, |c| c.to_complex(), Complex64::new(0.0, 0.0))
}

/// Real counterpart of [`matrix_representation`].
pub fn real_matrix_representation<C: RealNumeric>(
    poly: &OperatorPolynomial<C>,
    size1: usize,
    size2: usize,
) -> Result<DMatrix<f64>, AlgebraError> {
    fill(poly, size1, size2, |c| c.to_f64(), 0.0)
}
