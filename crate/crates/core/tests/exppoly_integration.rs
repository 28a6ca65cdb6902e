use henon_flow::algebra::Rational;
use henon_flow::exppoly::{exp_poly_integrate, ExpPoly, ExpPolyTerm};
use henon_flow::ode::{Rk45, Termination};
use proptest::prelude::*;

fn term() -> impl Strategy<Value = ExpPolyTerm> {
    (-3.0f64..3.0, 0u32..=3, 0i64..=12).prop_map(|(c, p, g)| ExpPolyTerm { c, p, gamma: Rational::new(g, 4) })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The closed form solves the same linear ODE a generic integrator sees.
    #[test]
    fn closed_form_matches_runge_kutta(terms in prop::collection::vec(term(), 1..=4), eps in 0i64..=12) {
        let alpha = ExpPoly::from_terms(terms);
        let epsilon = Rational::new(eps, 4);
        let e = *epsilon.numer() as f64 / *epsilon.denom() as f64;
        let delta = exp_poly_integrate(&alpha, epsilon);
        let outcome = Rk45::default()
            .integrate(|l, y, out| out[0] = -e * y[0] + alpha.evaluate(l), 0.0, &[0.0], 6.0, |_, _| false)
            .unwrap();
        prop_assert_eq!(outcome.termination, Termination::ReachedEnd);
        let exact = delta.evaluate(6.0);
        prop_assert!((outcome.y[0] - exact).abs() < 1e-8 * exact.abs().max(1.0), "rk {} vs closed form {}", outcome.y[0], exact);
    }

    #[test]
    fn product_evaluates_pointwise(a in prop::collection::vec(term(), 1..=3), b in prop::collection::vec(term(), 1..=3), l in 0.0f64..5.0) {
        let (a, b) = (ExpPoly::from_terms(a), ExpPoly::from_terms(b));
        let lhs = a.mul(&b).evaluate(l);
        let rhs = a.evaluate(l) * b.evaluate(l);
        prop_assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
    }
}

#[test]
fn limit_of_decaying_solution() {
    let alpha = ExpPoly::from_terms(vec![ExpPolyTerm { c: 2.0, p: 1, gamma: Rational::new(3, 2) }]);
    let delta = exp_poly_integrate(&alpha, Rational::from_integer(1));
    assert!(delta.decays());
    assert_eq!(delta.limit().unwrap(), 0.0);
    let constant = exp_poly_integrate(&alpha, Rational::from_integer(0));
    assert!(!constant.decays());
    let tail = constant.evaluate(60.0);
    assert!((constant.limit().unwrap() - tail).abs() < 1e-12);
}
