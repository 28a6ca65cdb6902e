//! Brute-force reference: dense diagonalization of the Hamiltonian in a
//! truncated product Fock basis, coupling sweeps and exact time propagation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::algebra::{build_henon_heiles, real_matrix_representation, AlgebraError, FlowParameters};

/// Largest product-basis dimension [`diagonalize`] accepts.
pub const DEFAULT_BASIS_CAP: usize = 4096;
/// Basis size per mode used for the reference tables.
pub const REFERENCE_BASIS: usize = 30;
/// Minimum squared weight of the dominant Fock component for a confident label.
pub const LABEL_CONFIDENCE: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("basis {size1}×{size2} exceeds the cap of {cap} states")]
    CapExceeded { size1: usize, size2: usize, cap: usize },
    #[error("assembled matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("vector of length {got} does not match basis dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("convergence check needs at least two basis sizes")]
    TooFewSizes,
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

/// Dominant Fock component of an eigenvector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StateLabel {
    pub n1: u32,
    pub n2: u32,
    /// squared modulus of the dominant component
    pub weight: f64,
}

impl StateLabel {
    /// `false` means the state is mixed and excluded from table alignment.
    pub fn is_confident(&self) -> bool {
        self.weight >= LABEL_CONFIDENCE
    }
}

#[derive(Clone, Debug)]
pub struct TruncatedSpectrum {
    pub size1: usize,
    pub size2: usize,
    /// ascending
    pub eigenvalues: Vec<f64>,
    /// one column per eigenvalue, basis ordered with `n2` fastest
    pub eigenvectors: DMatrix<f64>,
    pub labels: Vec<StateLabel>,
}

impl TruncatedSpectrum {
    pub fn dimension(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Lowest eigenvalue whose confident label is `(n1, n2)`.
    pub fn energy_of(&self, n1: u32, n2: u32) -> Option<f64> {
        self.labels
            .iter()
            .zip(&self.eigenvalues)
            .find(|(l, _)| l.is_confident() && l.n1 == n1 && l.n2 == n2)
            .map(|(_, e)| *e)
    }

    /// `max |VᵀV − I|`.
    pub fn orthonormality_residual(&self) -> f64 {
        let v = &self.eigenvectors;
        let g = v.transpose() * v;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Diagonalizes `H` (zero point included) in the `size1 × size2` basis.
pub fn diagonalize(params: FlowParameters, size1: usize, size2: usize) -> Result<TruncatedSpectrum, BaselineError> {
    diagonalize_with_cap(params, size1, size2, DEFAULT_BASIS_CAP)
}

pub fn diagonalize_with_cap(
    params: FlowParameters,
    size1: usize,
    size2: usize,
    cap: usize,
) -> Result<TruncatedSpectrum, BaselineError> {
    if size1.saturating_mul(size2) > cap {
        return Err(BaselineError::CapExceeded { size1, size2, cap });
    }
    let h = build_henon_heiles(params, true).total();
    let mat = real_matrix_representation(&h, size1, size2)?;
    let asym = (&mat - mat.transpose()).amax();
    if asym != 0.0 {
        return Err(BaselineError::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let labels = (0..order.len())
        .map(|c| {
            let (idx, amp) = eigenvectors
                .column(c)
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1.abs() { (i, *x) } else { best });
            StateLabel { n1: (idx / size2) as u32, n2: (idx % size2) as u32, weight: amp * amp }
        })
        .collect();
    Ok(TruncatedSpectrum { size1, size2, eigenvalues, eigenvectors, labels })
}

/// Drift of one level between a basis size and the largest one checked.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelDrift {
    pub level: usize,
    pub size: usize,
    pub energy: f64,
    pub drift: f64,
}

/// `|E_i(N) − E_i(N_max)|` for the lowest `levels` levels and every square
/// basis `N × N` in `sizes`.
pub fn convergence_check(
    params: FlowParameters,
    sizes: &[usize],
    levels: usize,
) -> Result<Vec<LevelDrift>, BaselineError> {
    if sizes.len() < 2 {
        return Err(BaselineError::TooFewSizes);
    }
    let spectra: Vec<TruncatedSpectrum> =
        sizes.par_iter().map(|&n| diagonalize(params, n, n)).collect::<Result<_, _>>()?;
    let reference = sizes.iter().enumerate().max_by_key(|(_, n)| **n).map(|(i, _)| i).unwrap_or(0);
    let mut out = Vec::new();
    for (s, spec) in sizes.iter().zip(&spectra) {
        for level in 0..levels.min(spec.dimension()).min(spectra[reference].dimension()) {
            let e = spec.eigenvalues[level];
            out.push(LevelDrift { level, size: *s, energy: e, drift: (e - spectra[reference].eigenvalues[level]).abs() });
        }
    }
    Ok(out)
}

/// Eigenvalues of one sweep point inside the level window.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    pub energies: Vec<f64>,
}

/// Which eigenvalues a sweep keeps: the first `count` at or above `min_energy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevelWindow {
    pub min_energy: f64,
    pub count: usize,
}

pub fn lambda_sweep(
    template: FlowParameters,
    lambdas: &[f64],
    window: LevelWindow,
    size: usize,
) -> Result<Vec<SweepPoint>, BaselineError> {
    lambdas
        .par_iter()
        .map(|&lambda| {
            let spec = diagonalize(template.with_lambda(lambda), size, size)?;
            let energies =
                spec.eigenvalues.iter().copied().filter(|e| *e >= window.min_energy).take(window.count).collect();
            Ok(SweepPoint { lambda, energies })
        })
        .collect()
}

/// Applies `e^{iHt}` to a state given by its Fock-basis coefficients.
pub fn propagate(
    initial: &[Complex64],
    t: f64,
    spectrum: &TruncatedSpectrum,
) -> Result<Vec<Complex64>, BaselineError> {
    let dim = spectrum.dimension();
    if initial.len() != dim {
        return Err(BaselineError::DimensionMismatch { expected: dim, got: initial.len() });
    }
    let v = spectrum.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let psi = DVector::from_column_slice(initial);
    let mut coeffs = v.transpose() * psi;
    for (c, e) in coeffs.iter_mut().zip(&spectrum.eigenvalues) {
        *c *= Complex64::from_polar(1.0, e * t);
    }
    Ok((v * coeffs).iter().copied().collect())
}
