use henon_flow::algebra::AlgebraError;
use henon_flow::baseline::BaselineError;
use henon_flow::cutoff::CutoffError;
use henon_flow::dynamics::DynamicsError;
use henon_flow::iterative::IterativeError;
use henon_flow::spectrum::SpectrumError;
use henon_flow::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Validation(_) => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// `error kind=<kind>: <message>` on a single line.
    pub fn diagnostic(&self) -> String {
        format!("error kind={}: {}", self.kind(), self.to_string().replace('\n', " "))
    }
}

fn is_precondition(e: &Error) -> bool {
    let algebra = |a: &AlgebraError| matches!(a, AlgebraError::InvalidParameter(_) | AlgebraError::Parse(_));
    let iterative = |i: &IterativeError| match i {
        IterativeError::InvalidOrder => true,
        IterativeError::Algebra(a) => algebra(a),
        _ => false,
    };
    let cutoff = |c: &CutoffError| match c {
        CutoffError::InvalidOrder(_) | CutoffError::InvalidTolerance => true,
        CutoffError::Algebra(a) => algebra(a),
        _ => false,
    };
    let baseline = |b: &BaselineError| matches!(b, BaselineError::CapExceeded { .. });
    let spectrum = |s: &SpectrumError| match s {
        SpectrumError::UnknownMethod(_) => true,
        SpectrumError::Iterative(i) => iterative(i),
        SpectrumError::Cutoff(c) => cutoff(c),
        SpectrumError::Baseline(b) => baseline(b),
        _ => false,
    };
    match e {
        Error::Algebra(a) => algebra(a),
        Error::Iterative(i) => iterative(i),
        Error::Cutoff(c) => cutoff(c),
        Error::Baseline(b) => baseline(b),
        Error::Spectrum(s) => spectrum(s),
        Error::Dynamics(DynamicsError::Iterative(i)) => iterative(i),
        Error::Dynamics(DynamicsError::Spectrum(s)) => spectrum(s),
        _ => false,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if is_precondition(&e) {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

macro_rules! via_crate_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        })*
    };
}

via_crate_error!(AlgebraError, IterativeError, CutoffError, BaselineError, SpectrumError, DynamicsError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn library_errors_split_into_input_and_numerical() {
        let bad_order: CliError = CutoffError::InvalidOrder(7).into();
        assert_eq!(bad_order.exit_code(), 2);
        let stalled: CliError = CutoffError::NotConverged { ell: 1e4, residual: 0.3 }.into();
        assert_eq!(stalled.exit_code(), 3);
        let nested: CliError = SpectrumError::Iterative(IterativeError::InvalidOrder).into();
        assert_eq!(nested.exit_code(), 2);
    }

    #[test]
    fn diagnostic_is_one_line() {
        let e = CliError::Numerical("a\nb".into());
        assert_eq!(e.diagnostic(), "error kind=numerical: a b");
    }
}
