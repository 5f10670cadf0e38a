use invariant_kit::certify::{check_mbf, BarrierProblem, Verdict, DEFAULT_TOL};
use invariant_kit::control::ControlProblem;
use invariant_kit::domain::BoxDomain;
use invariant_kit::expr::{ExprFunction, VectorExprFunction};
use invariant_kit::minfunc::MuCandidate;
use invariant_kit::sim::{comparison_overlay, integrate, integrate_batch, Dynamics};
use proptest::prelude::*;

fn vector(src: &[&str], vars: &[&str]) -> VectorExprFunction {
    VectorExprFunction::parse_vector(src, vars).unwrap()
}

fn terminal_error(dynamics: Dynamics<'_>, x0: f64, exact: f64, dt: f64) -> f64 {
    let h = ExprFunction::parse("x", &["x"]).unwrap();
    let tr = integrate(dynamics, &h, None, &[x0], 1.0, dt).unwrap();
    (tr.last_state()[0] - exact).abs()
}

#[test]
fn rk4_converges_at_fourth_order() {
    let constant = vector(&["-1"], &["x"]);
    for dt in [0.1, 0.05, 0.025] {
        assert!(terminal_error(Dynamics::Autonomous(&constant), 0.0, -1.0, dt) <= 1e-14);
    }

    let decay = vector(&["-abs(x)"], &["x"]);
    let v = ["x"];
    let closed = ControlProblem::new(
        vector(&["0"], &v),
        vector(&["1"], &v),
        ExprFunction::parse("x", &v).unwrap(),
        MuCandidate::parse("w").unwrap(),
        Some(vector(&["1", "-1"], &v)),
        Some(vector(&["1", "1"], &v)),
        vector(&["0"], &v),
        BoxDomain::uniform(vec![-2.0], vec![2.0], 5).unwrap(),
    )
    .unwrap();
    let e = (-1.0f64).exp();
    let cases: [(Dynamics<'_>, f64, f64); 2] =
        [(Dynamics::Autonomous(&decay), 1.0, e), (Dynamics::ClosedLoop(&closed), -0.5, -0.5 * e)];
    for (dynamics, x0, exact) in cases {
        let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|dt| terminal_error(dynamics, x0, exact, *dt)).collect();
        for pair in errs.windows(2) {
            assert!(pair[0] / pair[1] >= 8.0, "{errs:?}");
        }
    }
}

#[test]
fn batch_matches_sequential() {
    let vars = ["x1", "x2"];
    let f = vector(&["-x1 + x2", "x1 - x2"], &vars);
    let h = ExprFunction::parse("x1*x2", &vars).unwrap();
    let x0s: Vec<Vec<f64>> = (0..12).map(|i| vec![0.1 * i as f64, 1.0 - 0.05 * i as f64]).collect();
    let batch = integrate_batch(Dynamics::Autonomous(&f), &h, None, &x0s, 1.0, 1e-2);
    for (x0, tr) in x0s.iter().zip(batch) {
        let seq = integrate(Dynamics::Autonomous(&f), &h, None, x0, 1.0, 1e-2).unwrap();
        assert_eq!(tr.unwrap(), seq);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// For a certified problem, h along any trajectory (starting in S or not)
    /// stays above the minimal comparison solution.
    #[test]
    fn comparison_dominates_for_certified_problems(
        lambda in 0.1f64..1.5,
        r in 0.5f64..1.5,
        x0 in prop::array::uniform2(-2.4f64..2.4),
    ) {
        let vars = ["x1", "x2"];
        let rate = 2.0 * lambda;
        let prob = BarrierProblem::new(
            vector(&[&format!("-({lambda:?})*x1 + x2"), &format!("-x1 - ({lambda:?})*x2")], &vars),
            ExprFunction::parse(&format!("({:?}) - x1^2 - x2^2", r * r), &vars).unwrap(),
            MuCandidate::parse(&format!("({rate:?})*w - ({:?})", rate * r * r)).unwrap(),
            BoxDomain::uniform(vec![-2.5; 2], vec![2.5; 2], 41).unwrap(),
        )
        .unwrap();
        let rep = check_mbf(&prob, DEFAULT_TOL).unwrap();
        prop_assert_eq!(&rep.verdict, &Verdict::Certified);
        let tr = integrate(Dynamics::Autonomous(&prob.f), &prob.h, Some(&prob.domain), &x0, 2.0, 1e-3).unwrap();
        let ov = comparison_overlay(&tr, &prob.mu, 1e-3, 8).unwrap();
        prop_assert!(ov.dominance.holds, "{:?}", ov.dominance.first_violation);
    }
}
