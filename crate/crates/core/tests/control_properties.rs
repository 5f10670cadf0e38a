use invariant_kit::certify::{check_mbf, BarrierProblem, DEFAULT_TOL};
use invariant_kit::control::{check_mcbf, continuity_scan, ControlProblem};
use invariant_kit::domain::BoxDomain;
use invariant_kit::expr::{ExprFunction, VectorExprFunction};
use invariant_kit::minfunc::MuCandidate;
use invariant_kit::qp::{kkt_residual, least_distance, QpOutcome};
use invariant_kit::sim::{integrate, invariance_test, sample_in_set, Dynamics, DEFAULT_INVARIANCE_TOL};
use proptest::prelude::*;

fn vector(src: &[&str], vars: &[&str]) -> VectorExprFunction {
    VectorExprFunction::parse_vector(src, vars).unwrap()
}

/// ẋ = u, |u| ≤ 1, h = x, μ = w, k_nom = 0.
fn appendix(lo: f64, hi: f64, count: usize) -> ControlProblem {
    let v = ["x"];
    ControlProblem::new(
        vector(&["0"], &v),
        vector(&["1"], &v),
        ExprFunction::parse("x", &v).unwrap(),
        MuCandidate::parse("w").unwrap(),
        Some(vector(&["1", "-1"], &v)),
        Some(vector(&["1", "1"], &v)),
        vector(&["0"], &v),
        BoxDomain::uniform(vec![lo], vec![hi], count).unwrap(),
    )
    .unwrap()
}

fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (1usize..=3, 1usize..=6).prop_flat_map(|(m, k)| {
        (
            prop::collection::vec(prop::collection::vec(-2.0f64..2.0, m), k),
            prop::collection::vec(-1.0f64..2.0, k),
            prop::collection::vec(-3.0f64..3.0, m),
        )
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Solutions satisfy the KKT conditions; emptiness comes with a valid ray.
    #[test]
    fn qp_solutions_are_certified((g, d, u0) in instance()) {
        match least_distance(&g, &d, &u0).unwrap() {
            QpOutcome::Solved(s) => {
                prop_assert!(kkt_residual(&g, &u0, &s) <= 1e-8);
                for (i, (row, di)) in g.iter().zip(&d).enumerate() {
                    let slack = di - dot(row, &s.u);
                    prop_assert!(slack >= -1e-9, "row {} violated by {}", i, -slack);
                    prop_assert!(s.multipliers[i] >= -1e-10);
                    prop_assert!(s.multipliers[i] * slack.abs() <= 1e-8 * (1.0 + s.multipliers[i]));
                }
            }
            QpOutcome::Infeasible { ray } => {
                prop_assert!(ray.iter().all(|y| *y >= 0.0));
                prop_assert!((dot(&ray, &d) + 1.0).abs() <= 1e-9);
                for j in 0..u0.len() {
                    let col: f64 = g.iter().zip(&ray).map(|(r, y)| r[j] * y).sum();
                    prop_assert!(col.abs() <= 1e-9);
                }
            }
        }
    }
}

#[test]
fn closed_loop_from_outside_the_set() {
    let prob = appendix(-2.0, 2.0, 5);
    let tr = integrate(Dynamics::ClosedLoop(&prob), &prob.h, None, &[-0.5], 1.0, 1e-3).unwrap();
    // k̂(x) = −x for x ∈ [−1, 0], so x(t) = −0.5·e^{−t}
    assert!((tr.last_state()[0] + 0.5 * (-1.0f64).exp()).abs() <= 1e-6);
    assert!(tr.events.is_empty());
}

#[test]
fn closed_loop_keeps_the_set_invariant() {
    let prob = appendix(-0.99, 2.0, 300);
    for x0 in sample_in_set(&prob.h, &prob.domain, 100, 11).unwrap() {
        let tr = integrate(Dynamics::ClosedLoop(&prob), &prob.h, None, &x0, 5.0, 1e-3).unwrap();
        let inv = invariance_test(&tr, DEFAULT_INVARIANCE_TOL);
        assert!(inv.invariant && tr.events.is_empty(), "x0 {x0:?}: {:?}", inv.first_violation);
    }
}

#[test]
fn filter_is_lipschitz_along_a_path() {
    let prob = appendix(-0.99, 2.0, 300);
    let path: Vec<Vec<f64>> = prob.domain.points().collect();
    let scan = continuity_scan(&prob, &path).unwrap();
    assert!(scan.infeasible.is_empty());
    assert!(scan.max_jump_quotient <= 1.0 + 1e-9, "{}", scan.max_jump_quotient);
}

/// With g ≡ 0 the control condition reduces to the autonomous one.
#[test]
fn zero_input_matrix_matches_check_mbf() {
    let v = ["x1", "x2"];
    let f = vector(&["-x1 + x2", "x1 - x2"], &v);
    let h = ExprFunction::parse("x1*x2", &v).unwrap();
    let mu = MuCandidate::parse("2*w").unwrap().lipschitz();
    let domain = BoxDomain::uniform(vec![-2.0; 2], vec![2.0; 2], 101).unwrap();
    let ctrl = ControlProblem::new(
        f.clone(),
        VectorExprFunction::zeros(2, 1, &v),
        h.clone(),
        mu.clone(),
        Some(vector(&["1", "-1"], &v)),
        Some(vector(&["1", "1"], &v)),
        vector(&["0"], &v),
        domain.clone(),
    )
    .unwrap();
    let mcbf = check_mcbf(&ctrl, DEFAULT_TOL).unwrap().certification;
    let mbf = check_mbf(&BarrierProblem::new(f, h, mu, domain).unwrap(), DEFAULT_TOL).unwrap();
    assert_eq!(mcbf.samples.len(), mbf.samples.len());
    for (a, b) in mcbf.samples.iter().zip(&mbf.samples) {
        assert_eq!(a.margin.to_bits(), b.margin.to_bits(), "at {:?}", a.x);
    }
    assert_eq!(mcbf.verdict, mbf.verdict);
    assert_eq!(mcbf.min_margin.to_bits(), mbf.min_margin.to_bits());
}
