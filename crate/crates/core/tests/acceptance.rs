//! Reference criteria, run in sequence so the timing check sees an idle machine.
//! Each criterion prints one PASS/FAIL line; the test fails if any criterion does.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::*;
use henon_flow::algebra::{FlowParameters, ModeMonomial, Rational};
use henon_flow::baseline::{diagonalize, REFERENCE_BASIS};
use henon_flow::cutoff::{asymptotic_decay_rates, derive_flow_odes, fit_decay_rate, run_cutoff, DecayRate, VariableKind};
use henon_flow::dynamics::{completeness_residual, FlowDynamics, FockWindow};
use henon_flow::iterative::{iterate_flow, IterativeSolution};
use henon_flow::spectrum::{eigenvalue_from_normal_form, relative_error, spectrum_table, Method};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

type Outcome = Result<String, String>;

const INCOMMENSURATE_LABELS: [(u32, u32); 12] =
    [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (0, 3), (2, 0), (1, 2), (0, 4), (2, 1), (1, 3), (0, 5)];
const INCOMMENSURATE_CUTOFF: [f64; 12] =
    [0.995567, 1.687242, 2.278543, 2.375702, 2.959696, 3.060918, 3.549267, 3.637534, 3.742857, 4.219694, 4.312030, 4.421492];
const INCOMMENSURATE_ITER8: [f64; 12] =
    [0.995525, 1.687010, 2.278170, 2.375064, 2.958439, 3.059592, 3.548119, 3.634827, 3.740491, 4.216555, 4.307197, 4.417653];
const INCOMMENSURATE_NUMERICAL: [f64; 12] =
    [0.995519, 1.686994, 2.278132, 2.375036, 2.958353, 3.059551, 3.547947, 3.634664, 3.740435, 4.216180, 4.306912, 4.417578];
const INCOMMENSURATE_UPPER: [(usize, (u32, u32), f64); 6] = [
    (80, (1, 14), 11.348431),
    (81, (8, 1), 11.412886),
    (82, (7, 3), 11.415802),
    (83, (6, 5), 11.432484),
    (84, (5, 7), 11.470273),
    (85, (0, 16), 11.532429),
];
/// rows 1–17: improved energy, numerical energy, Δ in percent
const COMMENSURATE: [(f64, f64, f64); 17] = [
    (0.996990, 0.996987, 0.084),
    (1.983415, 1.983420, 0.030),
    (1.991180, 1.991170, 0.111),
    (2.956997, 2.957081, 0.195),
    (2.966985, 2.966957, 0.084),
    (2.988288, 2.988269, 0.162),
    (3.917954, 3.918277, 0.395),
    (3.926540, 3.926527, 0.018),
    (3.960219, 3.960177, 0.105),
    (3.983311, 3.983255, 0.331),
    (4.865409, 4.865039, 0.274),
    (4.870960, 4.871053, 0.072),
    (4.914437, 4.916403, 2.352),
    (4.948267, 4.948041, 0.435),
    (4.979130, 4.978266, 3.973),
    (5.796496, 5.795370, 0.550),
    (5.799784, 5.799166, 0.308),
];
/// `a†^i a^i b†^j b^j` coefficients of the eighth-order normal form, as printed
const NORMAL_FORM8: [((u32, u32), &str); 21] = [
    ((5, 0), "2.20910e-7"),
    ((4, 1), "1.19855e-6"),
    ((4, 0), "2.17973e-6"),
    ((3, 2), "1.54236e-6"),
    ((3, 1), "4.12440e-6"),
    ((3, 0), "-8.65783e-5"),
    ((2, 3), "6.09731e-8"),
    ((2, 2), "-4.99568e-6"),
    ((2, 1), "-0.00030"),
    ((2, 0), "-0.00634"),
    ((1, 4), "-2.46444e-7"),
    ((1, 3), "-6.97206e-6"),
    ((1, 2), "-0.00022"),
    ((1, 1), "-0.01121"),
    ((1, 0), "1.28264"),
    ((0, 5), "3.44234e-9"),
    ((0, 4), "-2.84772e-7"),
    ((0, 3), "-1.59258e-5"),
    ((0, 2), "-0.00171"),
    ((0, 1), "0.69148"),
    ((0, 0), "0.99552"),
];
/// second-order coefficient equations: variable, then `(coefficient, factors)`
const PRINTED_ODES: [(&str, &[(i64, &[&str])]); 12] = [
    (
        "w00",
        &[
            (-4, &["x1", "x1", "v"]),
            (-8, &["x1", "x1", "w"]),
            (-8, &["x1", "x2", "v"]),
            (-16, &["x1", "x2", "w"]),
            (-36, &["x4", "x4", "v"]),
            (-2, &["x6", "x6", "v"]),
            (-4, &["x2", "x2", "v"]),
            (-8, &["x2", "x2", "w"]),
        ],
    ),
    (
        "w",
        &[
            (-8, &["x1", "x1", "v"]),
            (-16, &["x1", "x1", "w"]),
            (-16, &["x1", "x2", "v"]),
            (-32, &["x1", "x2", "w"]),
            (-2, &["x3", "x3", "v"]),
            (-4, &["x3", "x6", "v"]),
            (-8, &["x2", "x2", "v"]),
            (-16, &["x2", "x2", "w"]),
        ],
    ),
    (
        "v",
        &[
            (-16, &["x1", "x1", "w"]),
            (-16, &["x1", "x2", "v"]),
            (-108, &["x4", "x4", "v"]),
            (-4, &["x5", "x5", "v"]),
            (-8, &["x5", "x6", "v"]),
            (-16, &["x2", "x2", "w"]),
        ],
    ),
    ("w20", &[(-4, &["x1", "x1", "v"]), (-16, &["x1", "x2", "w"]), (-2, &["x3", "x3", "v"]), (-4, &["x2", "x2", "v"])]),
    ("w11", &[(-32, &["x1", "x1", "w"]), (-32, &["x1", "x2", "v"]), (-8, &["x3", "x5", "v"]), (-32, &["x2", "x2", "w"])]),
    ("w02", &[(-54, &["x4", "x4", "v"]), (-6, &["x5", "x5", "v"])]),
    ("x1", &[(-1, &["x1", "v", "v"]), (-4, &["x1", "w", "w"]), (-4, &["x2", "v", "w"])]),
    ("x2", &[(-4, &["x1", "v", "w"]), (-1, &["x2", "v", "v"]), (-4, &["x2", "w", "w"])]),
    ("x3", &[(-1, &["x3", "v", "v"])]),
    ("x4", &[(-9, &["x4", "v", "v"])]),
    ("x5", &[(-1, &["x5", "v", "v"])]),
    ("x6", &[(-1, &["x6", "v", "v"])]),
];

const AMPLITUDE_FINALS: [(u32, u32); 4] = [(1, 0), (1, 1), (1, 2), (3, 0)];
const OCCUPATION_FINALS: [(u32, u32); 6] = [(1, 0), (1, 1), (1, 2), (3, 0), (3, 1), (1, 3)];

fn eighth_order() -> &'static (IterativeSolution, Duration) {
    static CELL: OnceLock<(IterativeSolution, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let sol = iterate_flow(FlowParameters::incommensurate_reference(), 8).unwrap();
        (sol, start.elapsed())
    })
}

fn eighth_order_dynamics() -> &'static FlowDynamics {
    static CELL: OnceLock<FlowDynamics> = OnceLock::new();
    CELL.get_or_init(|| FlowDynamics::from_solution(eighth_order().0.clone(), FockWindow::covering(8)).unwrap())
}

/// Half a unit in the last printed digit.
fn printed_half_ulp(text: &str) -> f64 {
    let (mantissa, exponent) = text.split_once('e').map_or((text, 0), |(m, e)| (m, e.parse::<i32>().unwrap()));
    let decimals = mantissa.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    0.5 * 10f64.powi(exponent - decimals)
}

fn verdict(worst: f64, tol: f64, what: &str) -> Outcome {
    let line = format!("{what}: max deviation {worst:.3e} (tolerance {tol:.0e})");
    if worst <= tol {
        Ok(line)
    } else {
        Err(line)
    }
}

fn incommensurate_iterative() -> Outcome {
    let (sol, elapsed) = eighth_order();
    let nf = sol.normal_form();
    let mut levels: Vec<((u32, u32), f64)> = (0..8u32)
        .flat_map(|a| (0..10u32).map(move |b| (a, b)))
        .map(|(a, b)| ((a, b), eigenvalue_from_normal_form(&nf, a, b).unwrap()))
        .collect();
    levels.sort_by(|x, y| x.1.total_cmp(&y.1));
    let labels: Vec<(u32, u32)> = levels.iter().take(12).map(|l| l.0).collect();
    if labels != INCOMMENSURATE_LABELS {
        return Err(format!("level order {labels:?}"));
    }
    let worst = levels.iter().zip(&INCOMMENSURATE_ITER8).map(|(l, e)| (l.1 - e).abs()).fold(0.0, f64::max);
    if elapsed.as_secs_f64() >= 60.0 {
        return Err(format!("K=8 took {:.1} s", elapsed.as_secs_f64()));
    }
    verdict(worst, 5e-6, &format!("K=8 in {:.1} s", elapsed.as_secs_f64()))
}

fn normal_form_coefficients() -> Outcome {
    let nf = eighth_order().0.normal_form();
    let mut worst_ratio: f64 = 0.0;
    let mut misses = Vec::new();
    for ((i, j), text) in NORMAL_FORM8 {
        let printed: f64 = text.parse().unwrap();
        let got = nf.coefficient(&ModeMonomial::number(i, j));
        let tol = (1e-4 * printed.abs()).max(printed_half_ulp(text));
        let ratio = (got - printed).abs() / tol;
        worst_ratio = worst_ratio.max(ratio);
        if ratio > 1.0 {
            misses.push(format!("({i},{j}) {got:.6e} vs {text}"));
        }
    }
    let line = format!("{} of 21 outside printed digits, worst {worst_ratio:.1}× tolerance", misses.len());
    if misses.is_empty() {
        Ok(line)
    } else {
        Err(format!("{line}; {}", misses.join(", ")))
    }
}

fn incommensurate_cutoff() -> Outcome {
    let table = spectrum_table(FlowParameters::incommensurate_reference(), Method::Cutoff(4), 12).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for ((n1, n2), e) in INCOMMENSURATE_LABELS.iter().zip(&INCOMMENSURATE_CUTOFF) {
        let entry = table.iter().find(|x| x.n1 == *n1 && x.n2 == *n2).ok_or(format!("|{n1},{n2}⟩ missing"))?;
        worst = worst.max((entry.energy - e).abs());
    }
    verdict(worst, 2e-5, "order-4 cut-off")
}

fn incommensurate_baseline() -> Outcome {
    let spec = diagonalize(FlowParameters::incommensurate_reference(), REFERENCE_BASIS, REFERENCE_BASIS).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (i, ((n1, n2), e)) in INCOMMENSURATE_LABELS.iter().zip(&INCOMMENSURATE_NUMERICAL).enumerate() {
        let l = spec.labels[i];
        if !l.is_confident() || (l.n1, l.n2) != (*n1, *n2) {
            return Err(format!("row {} labelled |{},{}⟩", i + 1, l.n1, l.n2));
        }
        worst = worst.max((spec.eigenvalues[i] - e).abs());
    }
    if worst > 2e-5 {
        return verdict(worst, 2e-5, "rows 1–12");
    }
    let (mut upper, mut mixed) = (0.0f64, Vec::new());
    for (row, (n1, n2), e) in INCOMMENSURATE_UPPER {
        // weakly dominated states are compared by rank
        let x = spec.energy_of(n1, n2).unwrap_or_else(|| {
            mixed.push(row);
            spec.eigenvalues[row - 1]
        });
        if (x - e).abs() > 5e-3 {
            return Err(format!("row {row} |{n1},{n2}⟩ at {x:.6} vs {e}"));
        }
        upper = upper.max((x - e).abs());
    }
    Ok(format!("rows 1–12 within {worst:.1e}; rows 80–85 within {upper:.1e}, mixed rows {mixed:?}"))
}

fn commensurate_improved() -> Outcome {
    let params = FlowParameters::commensurate_reference();
    let improved = spectrum_table(params, Method::Improved(6), 17).map_err(|e| e.to_string())?;
    let exact = diagonalize(params, REFERENCE_BASIS, REFERENCE_BASIS).map_err(|e| e.to_string())?;
    let (mut worst, mut worst_delta) = (0.0f64, 0.0f64);
    for (i, (entry, (e_impr, _, delta))) in improved.iter().zip(&COMMENSURATE).enumerate() {
        worst = worst.max((entry.energy - e_impr).abs());
        if *delta >= 0.05 {
            let ours = relative_error(entry.energy, exact.eigenvalues[i], entry.e_free).map_err(|e| e.to_string())?;
            worst_delta = worst_delta.max((ours - delta).abs() / delta);
        }
    }
    let line = format!("improved K=6: max deviation {worst:.3e} (tolerance 5e-5), Δ max relative deviation {worst_delta:.2}");
    if worst <= 5e-5 && worst_delta <= 0.1 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn second_order_odes() -> Outcome {
    let system = derive_flow_odes(2, FlowParameters::incommensurate_reference()).map_err(|e| e.to_string())?;
    let name = |i: usize| system.variables[i].name.as_str();
    let mut diffs = Vec::new();
    for (var, terms) in PRINTED_ODES {
        let j = system.index_of(var).ok_or(format!("no variable {var}"))?;
        let mut derived: BTreeMap<Vec<&str>, Rational> = BTreeMap::new();
        for t in &system.rhs[j] {
            let mut f: Vec<&str> = t.factors.iter().map(|&i| name(i)).collect();
            f.sort();
            *derived.entry(f).or_default() += t.coeff;
        }
        derived.retain(|_, c| *c != Rational::from_integer(0));
        let printed: BTreeMap<Vec<&str>, Rational> = terms
            .iter()
            .map(|(c, f)| {
                let mut f = f.to_vec();
                f.sort();
                (f, Rational::from_integer(*c))
            })
            .collect();
        for key in derived.keys().chain(printed.keys()) {
            let (d, p) = (derived.get(key).copied().unwrap_or_default(), printed.get(key).copied().unwrap_or_default());
            if d != p {
                diffs.push(format!("{var}′ {}: derived {d}, printed {p}", key.join("·")));
            }
        }
    }
    if system.len() != PRINTED_ODES.len() {
        diffs.push(format!("{} variables", system.len()));
    }
    if diffs.is_empty() {
        Ok("12 equations equal term for term".into())
    } else {
        diffs.dedup();
        Err(diffs.join("; "))
    }
}

fn decay_laws() -> Outcome {
    let (_, flow) = run_cutoff(FlowParameters::incommensurate_reference(), 2).map_err(|e| e.to_string())?;
    let (w, v) = (flow.final_state.w, flow.final_state.v);
    let rates = asymptotic_decay_rates(&flow.trajectory);
    let rate = |r: &DecayRate| match r {
        DecayRate::Rate(x) => Ok(*x),
        DecayRate::BelowFloor => Err("below noise floor".to_string()),
    };
    let x1 = rate(&rates["x1"])?;
    let x3 = rate(&rates["x3"])?;
    let (i1, i2) = (flow.trajectory.x_names.iter().position(|n| n == "x1").unwrap(), flow.trajectory.x_names.iter().position(|n| n == "x2").unwrap());
    let ells: Vec<f64> = flow.trajectory.states.iter().map(|s| s.ell).collect();
    let sum: Vec<f64> = flow.trajectory.states.iter().map(|s| s.x[i1] + s.x[i2]).collect();
    let x12 = rate(&fit_decay_rate(&ells, &sum))?;
    let (t1, t3) = ((2.0 * w + v).powi(2), v * v);
    let (e1, e3) = ((x1 - t1).abs() / t1, (x3 - t3).abs() / t3);
    let line = format!(
        "x1 {x1:.4} vs (2w∞+v∞)² = {t1:.4} ({:.1}%), x3 {x3:.4} vs v∞² = {t3:.4} ({:.2}%), x1+x2 {x12:.4}",
        100.0 * e1,
        100.0 * e3
    );
    if e1 <= 0.01 && e3 <= 0.01 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn cross_procedure() -> Outcome {
    let params = FlowParameters::incommensurate_reference().with_lambda(1e-6);
    let g2 = params.coupling().powi(2);
    let second = &iterate_flow(params, 2).map_err(|e| e.to_string())?.limit.orders[2];
    let (system, flow) = run_cutoff(params, 2).map_err(|e| e.to_string())?;
    let mut pairs = vec![
        (flow.frequency_shift[0] / g2, second.coefficient(&ModeMonomial::number(1, 0))),
        (flow.frequency_shift[1] / g2, second.coefficient(&ModeMonomial::number(0, 1))),
    ];
    let diagonal = system.variables.iter().filter(|v| v.kind == VariableKind::Diagonal);
    for (var, w_ij) in diagonal.zip(&flow.final_state.w_ij) {
        let mono = *var.family.monomials().next().unwrap();
        pairs.push((w_ij / g2, second.coefficient(&mono)));
    }
    let worst = pairs.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    verdict(worst, 1e-8, &format!("{} order-g² diagonal coefficients", pairs.len()))
}

fn dynamics_oracle() -> Outcome {
    let params = FlowParameters::incommensurate_reference();
    let d = eighth_order_dynamics();
    let alpha = d.excited_state(1, 0).map_err(|e| e.to_string())?;
    for (k, m) in [(0, 0), (0, 1), (2, 0), (2, 1), (0, 2), (4, 0)] {
        let f = d.amplitude(&alpha, &d.excited_state(k, m).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        if !f.is_identically_zero() || f.evaluate(250.0).norm() != 0.0 {
            return Err(format!("a†^{k} b†^{m} reachable from a†|0⟩"));
        }
    }
    let oracle = SpectralOracle::new(params, REFERENCE_BASIS, (1, 0));
    let mut worst: f64 = 0.0;
    for final_state in AMPLITUDE_FINALS {
        let beta = d.excited_state(final_state.0, final_state.1).map_err(|e| e.to_string())?;
        let f = d.amplitude(&alpha, &beta).map_err(|e| e.to_string())?;
        for i in 0..=4000 {
            let t = i as f64 * 0.25;
            worst = worst.max((f.evaluate(t) - oracle.amplitude(final_state, t)).norm());
        }
    }
    verdict(worst, 1e-3, "K=8 amplitudes to a†, a†b†, a†b†², a†³ on t ≤ 10³, even-a† finals exactly 0")
}

fn completeness() -> Outcome {
    let d = eighth_order_dynamics();
    let alpha = d.excited_state(1, 0).map_err(|e| e.to_string())?;
    let finals = OCCUPATION_FINALS
        .iter()
        .map(|&(k, m)| d.amplitude(&alpha, &d.excited_state(k, m)?))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let worst = (0..=2000).map(|i| completeness_residual(&finals, i as f64 * 0.25).abs()).fold(0.0, f64::max);
    verdict(worst, 5e-2, "six-final residual on t ∈ [0, 500]")
}

const PROPERTY_CASES: u32 = 1000;

fn property<S: Strategy>(name: &str, strategy: S, check: impl Fn(S::Value) -> Result<(), String>) -> Result<(), String> {
    let mut runner = TestRunner::new(Config { cases: PROPERTY_CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, |x| check(x).map_err(TestCaseError::fail)).map_err(|e| format!("{name}: {e}"))
}

fn algebra_suite() -> Outcome {
    property("commutator oracle", (polynomial(), polynomial()), |(a, b)| commutator_matches_oracle(&a, &b))?;
    property("Jacobi", (polynomial(), polynomial(), polynomial()), |(a, b, c)| jacobi_identity(&a, &b, &c))?;
    property("Hermiticity", (hermitian(), hermitian()), |(a, b)| hermiticity_preserved(&a, &b))?;
    property("eigenoperator", (word(), frequency(), frequency()), |(t, w, v)| eigenoperator_identity(t, w, v))?;
    Ok(format!("4 properties × {PROPERTY_CASES} cases"))
}

#[test]
fn reference_criteria() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("incommensurate levels, iterative K=8", incommensurate_iterative),
        ("eighth-order normal-form coefficients", normal_form_coefficients),
        ("incommensurate levels, cut-off order 4", incommensurate_cutoff),
        ("incommensurate levels, Fock baseline", incommensurate_baseline),
        ("commensurate levels, improved K=6", commensurate_improved),
        ("second-order coefficient equations", second_order_odes),
        ("asymptotic decay laws", decay_laws),
        ("iterative vs cut-off at order g²", cross_procedure),
        ("transition amplitudes vs exact propagation", dynamics_oracle),
        ("completeness residual", completeness),
        ("boson algebra properties", algebra_suite),
    ];
    let mut failed = Vec::new();
    for (i, (title, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let n = i + 1;
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {title}: {detail}"),
            Err(detail) => {
                println!("criterion {n:>2} FAIL  {title}: {detail}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria {failed:?}");
}
