//! One function per subcommand, each writing CSV to the given sink.

use std::io::Write;

use henon_flow::algebra::{coupling_for, rational_to_f64, FlowParameters, ModeMonomial, OperatorPolynomial};
use henon_flow::baseline::{diagonalize, lambda_sweep, LevelWindow, TruncatedSpectrum};
use henon_flow::cutoff::run_cutoff;
use henon_flow::dynamics::{completeness_residual, FlowDynamics, FockWindow};
use henon_flow::iterative::{iterate_flow, IterativeSolution};
use henon_flow::spectrum::{attach_reference, eigenvalue_from_normal_form, spectrum_table, Method, SpectrumEntry};
use log::{info, warn};
use num_complex::Complex64;

use crate::config::{MethodKind, RunConfig};
use crate::error::CliError;

/// Twelve significant digits, plain notation where that stays readable.
pub fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    if (-5..=11).contains(&magnitude) {
        let decimals = (11 - magnitude).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| {
            let f = i as f64 / (points - 1) as f64;
            lo * (1.0 - f) + hi * f
        })
        .collect()
}

/// Stationary point of the classical potential with indefinite Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Saddle {
    pub q1: f64,
    pub q2: f64,
    pub energy: f64,
}

/// Saddles of `V`, found by Newton iteration on `∇V = 0` from a grid of
/// starting points, sorted by energy.
pub fn saddle_points(params: &FlowParameters) -> Vec<Saddle> {
    let (w, v, l, n) = (params.w_f64(), params.v_f64(), params.lambda, rational_to_f64(params.n_aniso));
    if l == 0.0 {
        return Vec::new();
    }
    let reach = 4.0 * (w.max(v) / l.abs()).max(1.0);
    let grad = |q1: f64, q2: f64| [w * q1 + 2.0 * l * q1 * q2, v * q2 + l * (q1 * q1 + 3.0 * n * q2 * q2)];
    let hess = |q1: f64, q2: f64| [[w + 2.0 * l * q2, 2.0 * l * q1], [2.0 * l * q1, v + 6.0 * l * n * q2]];
    let mut found: Vec<Saddle> = Vec::new();
    for s1 in grid(-reach, reach, 21) {
        for s2 in grid(-reach, reach, 21) {
            let (mut q1, mut q2) = (s1, s2);
            for _ in 0..100 {
                let g = grad(q1, q2);
                let h = hess(q1, q2);
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                if det.abs() < 1e-14 {
                    break;
                }
                let d1 = (h[1][1] * g[0] - h[0][1] * g[1]) / det;
                let d2 = (h[0][0] * g[1] - h[1][0] * g[0]) / det;
                q1 -= d1;
                q2 -= d2;
                if d1.abs().max(d2.abs()) < 1e-13 {
                    break;
                }
            }
            let g = grad(q1, q2);
            let h = hess(q1, q2);
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            if g[0].hypot(g[1]) > 1e-9 || det >= 0.0 {
                continue;
            }
            if found.iter().all(|s| (s.q1 - q1).hypot(s.q2 - q2) > 1e-6) {
                found.push(Saddle { q1, q2, energy: params.potential(q1, q2) });
            }
        }
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.q1.total_cmp(&b.q1)));
    found
}

/// `q1,q2,potential` on the configured grid; saddles go to the log.
pub fn cmd_potential<W: Write>(config: &RunConfig, out: W) -> Result<(), CliError> {
    let params = config.params()?;
    let p = &config.potential;
    for s in saddle_points(&params) {
        info!("saddle at q1={} q2={} energy={}", sig12(s.q1), sig12(s.q2), sig12(s.energy));
    }
    let mut csv = writer(out);
    csv.write_record(["q1", "q2", "potential"])?;
    for q1 in grid(p.q1[0], p.q1[1], p.points[0]) {
        for q2 in grid(p.q2[0], p.q2[1], p.points[1]) {
            csv.write_record([sig12(q1), sig12(q2), sig12(params.potential(q1, q2))])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn baseline_entries(params: FlowParameters, spec: &TruncatedSpectrum, count: usize) -> Vec<SpectrumEntry> {
    spec.eigenvalues
        .iter()
        .zip(&spec.labels)
        .take(count)
        .map(|(e, l)| SpectrumEntry {
            n1: l.n1,
            n2: l.n2,
            energy: *e,
            method: Method::Baseline,
            e_free: params.free_energy(l.n1, l.n2),
            confident: l.is_confident(),
            numerical: Some(*e),
            delta: None,
        })
        .collect()
}

/// Level table of the configured method, joined with the baseline on request.
pub fn cmd_spectrum<W: Write>(config: &RunConfig, out: W) -> Result<(), CliError> {
    let params = config.params()?;
    let count = config.spectrum.levels;
    let basis = config.spectrum.basis;
    let mut entries = match config.method {
        MethodKind::Baseline => baseline_entries(params, &diagonalize(params, basis, basis)?, count),
        _ => spectrum_table(params, config.spectral_method(), count)?,
    };
    if config.spectrum.reference && config.method != MethodKind::Baseline {
        // generous depth so shifted levels still find their label
        let spec = diagonalize(params, basis, basis)?;
        attach_reference(&mut entries, &baseline_entries(params, &spec, 4 * count));
    }
    let mut csv = writer(out);
    csv.write_record(["n", "n1", "n2", "method", "energy", "numerical", "e_free", "delta_percent", "confident"])?;
    for (i, e) in entries.iter().enumerate() {
        csv.write_record([
            (i + 1).to_string(),
            e.n1.to_string(),
            e.n2.to_string(),
            e.method.to_string(),
            sig12(e.energy),
            opt(e.numerical),
            sig12(e.e_free),
            opt(e.delta),
            e.confident.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}

/// The `2·count` states lowest in free energy.
fn candidate_states(params: &FlowParameters, count: usize) -> Vec<(u32, u32)> {
    let span = 2 * count as u32 + 2;
    let mut states: Vec<(u32, u32)> = (0..span).flat_map(|a| (0..span).map(move |b| (a, b))).collect();
    states.sort_by(|x, y| params.free_energy(x.0, x.1).total_cmp(&params.free_energy(y.0, y.1)).then(x.cmp(y)));
    states.truncate(2 * count);
    states
}

/// The `count` lowest normal-form levels among the candidate states.
fn lowest_levels(
    params: &FlowParameters,
    diag: &OperatorPolynomial<f64>,
    count: usize,
) -> Result<Vec<((u32, u32), f64)>, CliError> {
    let mut levels = candidate_states(params, count)
        .into_iter()
        .map(|(a, b)| Ok(((a, b), eigenvalue_from_normal_form(diag, a, b)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    levels.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    levels.truncate(count);
    Ok(levels)
}

/// Diagonal part of `Σ_k g^k H_k(∞)` at a new coupling, zero point included.
fn resummed_normal_form(solution: &IterativeSolution, params: &FlowParameters) -> OperatorPolynomial<f64> {
    let g = coupling_for(params.lambda, params.w_f64(), params.v_f64());
    let mut h = solution.limit.sum(g, solution.order());
    h.add_term(ModeMonomial::IDENTITY, rational_to_f64(params.zero_point()));
    h.split_diagonal().0
}

type Level = (Option<(u32, u32)>, f64);

fn emit<W: Write>(csv: &mut csv::Writer<W>, lambda: f64, levels: &[Level]) -> Result<(), CliError> {
    for (i, (label, e)) in levels.iter().enumerate() {
        let (n1, n2) = label.map(|(a, b)| (a.to_string(), b.to_string())).unwrap_or_default();
        csv.write_record([sig12(lambda), (i + 1).to_string(), n1, n2, sig12(*e), "ok".into()])?;
    }
    Ok(())
}

/// Per-level curves over the λ grid. The iterative run is done once; its
/// orders do not depend on λ.
pub fn cmd_sweep<W: Write>(config: &RunConfig, out: W) -> Result<(), CliError> {
    let params = config.params()?;
    let s = &config.sweep;
    let lambdas = grid(s.lambda_min, s.lambda_max, s.points);
    let mut csv = writer(out);
    csv.write_record(["lambda", "level", "n1", "n2", "energy", "status"])?;
    match config.method {
        MethodKind::Baseline => {
            let window = LevelWindow { min_energy: s.min_energy, count: s.levels };
            for point in lambda_sweep(params, &lambdas, window, s.basis)? {
                let levels: Vec<_> = point.energies.iter().map(|e| (None, *e)).collect();
                emit(&mut csv, point.lambda, &levels)?;
            }
        }
        MethodKind::Iter => {
            let solution = iterate_flow(params, config.order)?;
            for &lambda in &lambdas {
                let p = params.with_lambda(lambda);
                let levels = lowest_levels(&p, &resummed_normal_form(&solution, &p), s.levels)?;
                emit(&mut csv, lambda, &levels.into_iter().map(|(l, e)| (Some(l), e)).collect::<Vec<_>>())?;
            }
        }
        MethodKind::Cutoff => {
            for &lambda in &lambdas {
                let p = params.with_lambda(lambda);
                match run_cutoff(p, config.order as u32) {
                    Ok((system, flow)) => {
                        let levels = lowest_levels(&p, &system.normal_form(&flow.final_state), s.levels)?;
                        emit(&mut csv, lambda, &levels.into_iter().map(|(l, e)| (Some(l), e)).collect::<Vec<_>>())?;
                    }
                    Err(e) => {
                        warn!("λ={lambda}: {e}");
                        csv.write_record([sig12(lambda), String::new(), String::new(), String::new(), String::new(), "breakdown".into()])?;
                    }
                }
            }
        }
        MethodKind::Improved => {
            return Err(CliError::Validation("sweep supports the cutoff, iter and baseline methods".into()));
        }
    }
    csv.flush()?;
    Ok(())
}

/// Exact `⟨β|e^{iHt}|α⟩` between bare Fock states from one truncated spectrum.
struct ExactAmplitudes {
    spectrum: TruncatedSpectrum,
    size: usize,
    /// eigenstate index and overlap with the initial state
    support: Vec<(usize, f64)>,
}

impl ExactAmplitudes {
    fn new(params: FlowParameters, size: usize, initial: [u32; 2]) -> Result<Self, CliError> {
        let spectrum = diagonalize(params, size, size)?;
        let row = initial[0] as usize * size + initial[1] as usize;
        let support = (0..spectrum.dimension())
            .map(|i| (i, spectrum.eigenvectors[(row, i)]))
            .filter(|(_, c)| c.abs() > 1e-13)
            .collect();
        Ok(ExactAmplitudes { spectrum, size, support })
    }

    fn amplitude(&self, beta: [u32; 2], t: f64) -> Complex64 {
        let row = beta[0] as usize * self.size + beta[1] as usize;
        self.support
            .iter()
            .map(|&(i, c)| Complex64::from_polar(c * self.spectrum.eigenvectors[(row, i)], self.spectrum.eigenvalues[i] * t))
            .sum()
    }
}

/// Transition amplitudes from the initial state to every configured final
/// state, their completeness residual and, optionally, exact propagation.
pub fn cmd_dynamics<W: Write>(config: &RunConfig, out: W) -> Result<(), CliError> {
    if !matches!(config.method, MethodKind::Iter | MethodKind::Improved) {
        return Err(CliError::Validation("dynamics needs an iterative method".into()));
    }
    let params = config.params()?;
    let d = &config.dynamics;
    let k = config.order;
    let steps = (d.t_max / d.dt + 1e-9).floor() as usize;
    let mut header = vec!["lambda".to_string(), "t".into()];
    for [a, b] in &d.finals {
        for part in ["re", "im", "abs"] {
            header.push(format!("f_{a}_{b}_{part}"));
        }
        if d.oracle_basis > 0 {
            header.push(format!("exact_{a}_{b}_re"));
            header.push(format!("exact_{a}_{b}_im"));
        }
    }
    header.push("residual".into());
    let mut csv = writer(out);
    csv.write_record(&header)?;

    let base = iterate_flow(params.with_lambda(d.lambdas[0]), k)?;
    for &lambda in &d.lambdas {
        let p = params.with_lambda(lambda);
        let mut solution = base.clone();
        solution.params = p;
        let flow = FlowDynamics::from_solution(solution, FockWindow::covering(k))?;
        let alpha = flow.excited_state(d.initial[0], d.initial[1])?;
        let amplitudes = d
            .finals
            .iter()
            .map(|&[a, b]| flow.amplitude(&alpha, &flow.excited_state(a, b)?))
            .collect::<Result<Vec<_>, _>>()?;
        let exact = if d.oracle_basis > 0 { Some(ExactAmplitudes::new(p, d.oracle_basis, d.initial)?) } else { None };
        for i in 0..=steps {
            let t = i as f64 * d.dt;
            let mut row = vec![sig12(lambda), sig12(t)];
            for (f, beta) in amplitudes.iter().zip(&d.finals) {
                let z = f.evaluate(t);
                row.extend([sig12(z.re), sig12(z.im), sig12(z.norm())]);
                if let Some(x) = &exact {
                    let z = x.amplitude(*beta, t);
                    row.extend([sig12(z.re), sig12(z.im)]);
                }
            }
            row.push(sig12(completeness_residual(&amplitudes, t)));
            csv.write_record(&row)?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// Normal form of the configured method in the polynomial text form.
pub fn cmd_normal_form<W: Write>(config: &RunConfig, mut out: W) -> Result<(), CliError> {
    let params = config.params()?;
    let diag = match config.method {
        MethodKind::Iter | MethodKind::Improved => iterate_flow(params, config.order)?.normal_form(),
        MethodKind::Cutoff => {
            let (system, flow) = run_cutoff(params, config.order as u32)?;
            system.normal_form(&flow.final_state)
        }
        MethodKind::Baseline => {
            return Err(CliError::Validation("the baseline has no operator normal form".into()));
        }
    };
    out.write_all(diag.to_text().as_bytes())?;
    Ok(())
}

/// `word,left,right,difference` for every word of either dump, plus the maximum.
pub fn cmd_compare<W: Write>(left: &str, right: &str, out: W) -> Result<(), CliError> {
    let parse = |text: &str| {
        OperatorPolynomial::<f64>::from_text(text).map_err(|e| CliError::Validation(e.to_string()))
    };
    let (a, b) = (parse(left)?, parse(right)?);
    let mut words: Vec<&ModeMonomial> = a.monomials().chain(b.monomials()).collect();
    words.sort();
    words.dedup();
    let mut csv = writer(out);
    csv.write_record(["word", "left", "right", "difference"])?;
    for m in words {
        let (x, y) = (a.coefficient(m), b.coefficient(m));
        csv.write_record([format!("{} {} {} {}", m.k, m.r, m.m, m.n), sig12(x), sig12(y), sig12(x - y)])?;
    }
    csv.write_record(["max".into(), String::new(), String::new(), sig12(a.max_abs_diff(&b))])?;
    csv.flush()?;
    Ok(())
}
