//! Run configuration, read from a TOML file with every field defaulted.

use std::path::PathBuf;

use henon_flow::algebra::FlowParameters;
use henon_flow::baseline::{DEFAULT_BASIS_CAP, REFERENCE_BASIS};
use henon_flow::spectrum::Method;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Highest iterative order accepted from a config file.
pub const MAX_ITERATIVE_ORDER: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Cutoff,
    Iter,
    Improved,
    Baseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// exact rational, `"13/10"` or `"1.3"`
    pub w: String,
    pub v: String,
    pub lambda: f64,
    pub n_aniso: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { w: "1.3".into(), v: "0.7".into(), lambda: -0.1, n_aniso: "0.1".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub levels: usize,
    /// join with a truncated diagonalization and report Δ
    pub reference: bool,
    /// per-mode size of the reference basis
    pub basis: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig { levels: 12, reference: true, basis: REFERENCE_BASIS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
    /// curves per point
    pub levels: usize,
    /// baseline only: keep eigenvalues at or above this energy
    pub min_energy: f64,
    pub basis: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { lambda_min: -0.5, lambda_max: -0.1, points: 256, levels: 29, min_energy: 0.7, basis: REFERENCE_BASIS }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsConfig {
    pub lambdas: Vec<f64>,
    /// occupations `[n1, n2]` of the initial state
    pub initial: [u32; 2],
    pub finals: Vec<[u32; 2]>,
    pub t_max: f64,
    pub dt: f64,
    /// per-mode size of the exact-propagation basis; 0 disables the comparison
    pub oracle_basis: usize,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            lambdas: vec![-0.1],
            initial: [1, 0],
            finals: vec![[1, 0], [1, 1], [1, 2], [3, 0], [3, 1], [1, 3]],
            t_max: 1000.0,
            dt: 0.25,
            oracle_basis: REFERENCE_BASIS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub q1: [f64; 2],
    pub q2: [f64; 2],
    pub points: [usize; 2],
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig { q1: [-8.0, 8.0], q2: [-6.0, 10.0], points: [81, 81] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: MethodKind,
    /// iterative order K or cut-off truncation order
    pub order: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    pub spectrum: SpectrumConfig,
    pub sweep: SweepConfig,
    pub dynamics: DynamicsConfig,
    pub potential: PotentialConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            method: MethodKind::Iter,
            order: 8,
            output: None,
            model: ModelConfig::default(),
            spectrum: SpectrumConfig::default(),
            sweep: SweepConfig::default(),
            dynamics: DynamicsConfig::default(),
            potential: PotentialConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn check_basis(name: &str, n: usize) -> Result<(), CliError> {
    if n < 2 || n * n > DEFAULT_BASIS_CAP {
        return Err(invalid(format!("{name} = {n} must satisfy 2 ≤ n and n² ≤ {DEFAULT_BASIS_CAP}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<FlowParameters, CliError> {
        let m = &self.model;
        FlowParameters::parse(&m.w, &m.v, m.lambda, &m.n_aniso).map_err(|e| invalid(e.to_string()))
    }

    pub fn spectral_method(&self) -> Method {
        match self.method {
            MethodKind::Cutoff => Method::Cutoff(self.order as u32),
            MethodKind::Iter => Method::Iterative(self.order),
            MethodKind::Improved => Method::Improved(self.order),
            MethodKind::Baseline => Method::Baseline,
        }
    }

    /// Checks every precondition the dispatched command relies on.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        match self.method {
            MethodKind::Cutoff if !(2..=4).contains(&self.order) => {
                return Err(invalid(format!("cut-off order {} not in 2..=4", self.order)))
            }
            MethodKind::Iter | MethodKind::Improved if !(1..=MAX_ITERATIVE_ORDER).contains(&self.order) => {
                return Err(invalid(format!("iterative order {} not in 1..={MAX_ITERATIVE_ORDER}", self.order)))
            }
            _ => {}
        }
        if self.spectrum.levels == 0 {
            return Err(invalid("spectrum.levels must be positive"));
        }
        check_basis("spectrum.basis", self.spectrum.basis)?;

        let s = &self.sweep;
        if !(s.lambda_min.is_finite() && s.lambda_max.is_finite() && s.lambda_min <= s.lambda_max) {
            return Err(invalid("sweep range must be finite with lambda_min ≤ lambda_max"));
        }
        if s.points == 0 || s.levels == 0 {
            return Err(invalid("sweep.points and sweep.levels must be positive"));
        }
        check_basis("sweep.basis", s.basis)?;

        let d = &self.dynamics;
        if d.lambdas.is_empty() || d.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(invalid("dynamics.lambdas must be a non-empty list of finite values"));
        }
        if d.finals.is_empty() {
            return Err(invalid("dynamics.finals must not be empty"));
        }
        if !(d.dt > 0.0 && d.t_max >= 0.0 && d.t_max.is_finite()) {
            return Err(invalid("dynamics time grid needs dt > 0 and a finite t_max ≥ 0"));
        }
        if d.oracle_basis != 0 {
            check_basis("dynamics.oracle_basis", d.oracle_basis)?;
        }

        let p = &self.potential;
        if p.points.iter().any(|&n| n < 2) || !(p.q1[0] < p.q1[1] && p.q2[0] < p.q2[1]) {
            return Err(invalid("potential grid needs ≥ 2 points per axis and increasing bounds"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_incommensurate_reference() {
        let c = RunConfig::default();
        assert_eq!(c.params().unwrap(), FlowParameters::incommensurate_reference());
        assert_eq!(c.spectral_method(), Method::Iterative(8));
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_other_defaults() {
        let c = RunConfig::from_toml("method = \"cutoff\"\norder = 4\n[model]\nlambda = -0.2\n").unwrap();
        assert_eq!(c.spectral_method(), Method::Cutoff(4));
        assert_eq!(c.model.lambda, -0.2);
        assert_eq!(c.model.w, "1.3");
        assert_eq!(c.sweep, SweepConfig::default());
    }

    #[test]
    fn preconditions_are_rejected() {
        let bad = |c: RunConfig| matches!(c.validate(), Err(CliError::Validation(_)));
        assert!(bad(RunConfig { method: MethodKind::Cutoff, order: 5, ..RunConfig::default() }));
        assert!(bad(RunConfig { order: 0, ..RunConfig::default() }));
        let mut c = RunConfig::default();
        c.model.w = "-1".into();
        assert!(bad(c));
        let mut c = RunConfig::default();
        c.sweep.basis = 100;
        assert!(bad(c));
        assert!(RunConfig::from_toml("unknown = 1").is_err());
    }
}
