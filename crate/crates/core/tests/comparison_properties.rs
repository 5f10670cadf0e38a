use invariant_kit::comparison::{minimal_solution, ScalarIvp};
use invariant_kit::minfunc::{classify, MinimalCase, MuCandidate, MuFunction};
use invariant_kit::ode::rk4_step_scalar;
use proptest::prelude::*;

fn poly(coeffs: &[f64]) -> String {
    coeffs.iter().enumerate().map(|(k, c)| format!("({c:?})*w^{k}")).collect::<Vec<_>>().join(" + ")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn negative_at_zero_is_case_1(c0 in -5.0f64..-1e-6, rest in prop::collection::vec(-10.0f64..10.0, 0..4)) {
        let mut coeffs = vec![c0];
        coeffs.extend(rest);
        let v = classify(&MuCandidate::parse(&poly(&coeffs)).unwrap()).unwrap();
        prop_assert_eq!(v.case(), Some(MinimalCase::Case1));
    }

    /// α strictly increasing with α(0) = 0; μ = α is nonpositive left of 0.
    #[test]
    fn extended_class_k_is_case_2(a1 in 0.0f64..3.0, a3 in 0.0f64..3.0, a5 in 0.01f64..3.0) {
        let v = classify(&MuCandidate::parse(&poly(&[0.0, a1, 0.0, a3, 0.0, a5])).unwrap()).unwrap();
        prop_assert_eq!(v.case(), Some(MinimalCase::Case2));
    }

    #[test]
    fn classification_is_deterministic(c in prop::collection::vec(-2.0f64..2.0, 1..5)) {
        let cand = MuCandidate::parse(&poly(&c)).unwrap();
        prop_assert_eq!(classify(&cand).unwrap(), classify(&cand).unwrap());
    }

    /// Smaller perturbations give larger lower solutions.
    #[test]
    fn halving_eps0_does_not_lower_the_family(w0 in -1.0f64..1.0, a in -2.0f64..2.0) {
        let mu = MuFunction::parse(&format!("({a:?})*w + cbrt(w)^2")).unwrap();
        let ivp = ScalarIvp::new(mu, w0, 1.0, 1e-3).unwrap();
        let coarse = minimal_solution(&ivp, 1e-3, 6).unwrap();
        let fine = minimal_solution(&ivp, 5e-4, 6).unwrap();
        for (c, f) in coarse.last().iter().zip(fine.last()) {
            prop_assert!(*f >= c - 10.0 * 1e-6, "{f} < {c}");
        }
    }
}

#[test]
fn lipschitz_mu_keeps_zero_solution() {
    for src in ["w", "-w", "2*w", "w + w^2", "w^3 - 2*w", "-3*w + w^2 - w^3"] {
        let ivp = ScalarIvp::new(MuFunction::parse(src).unwrap(), 0.0, 1.0, 1e-3).unwrap();
        let cmp = minimal_solution(&ivp, 1e-3, 8).unwrap();
        let worst = cmp.estimate.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst <= 1e-6, "{src}: |estimate| reaches {worst:e}");
    }
}

fn rk4_error(f: impl Fn(f64) -> f64, w0: f64, exact: f64, dt: f64) -> f64 {
    let mut rhs = |w: f64| Ok::<f64, ()>(f(w));
    let steps = (1.0 / dt).round() as usize;
    let mut w = w0;
    for _ in 0..steps {
        w = rk4_step_scalar(&mut rhs, w, dt).unwrap();
    }
    (w - exact).abs()
}

#[test]
fn rk4_order() {
    // ẇ = −μ(w) with μ = −1 is integrated exactly
    for dt in [0.1, 0.05, 0.025] {
        assert!(rk4_error(|_| 1.0, 0.25, 1.25, dt) <= 1e-13);
    }
    // μ = w: w(1) = e^{−1}
    let exact = (-1.0f64).exp();
    let errs: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|dt| rk4_error(|w| -w, 1.0, exact, *dt)).collect();
    for pair in errs.windows(2) {
        assert!(pair[0] / pair[1] >= 8.0, "{errs:?}");
    }
}
