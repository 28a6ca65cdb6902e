use thiserror::Error;

use crate::algebra::AlgebraError;
use crate::baseline::BaselineError;
use crate::cutoff::CutoffError;
use crate::dynamics::DynamicsError;
use crate::exppoly::ExpPolyError;
use crate::iterative::IterativeError;
use crate::ode::OdeError;
use crate::spectrum::SpectrumError;

/// Crate-level error wrapping the per-module failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    ExpPoly(#[from] ExpPolyError),
    #[error(transparent)]
    Iterative(#[from] IterativeError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Cutoff(#[from] CutoffError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}
