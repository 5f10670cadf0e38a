use invariant_kit::expr::ExprFunction;
use proptest::prelude::*;

const VARS: [&str; 2] = ["x", "y"];

/// Random expression sources up to depth 6.
fn tree() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        (-5.0f64..5.0).prop_map(|c| format!("{c}")),
        (0u32..4).prop_map(|c| c.to_string()),
    ];
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                .prop_map(|(a, b, op)| format!("({a}) {op} ({b})")),
            (inner.clone(), 0u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (inner.clone(), prop::sample::select(vec!["abs", "exp", "ln", "sqrt", "cbrt", "sin", "cos"]))
                .prop_map(|(a, f)| format!("{f}({a})")),
            (inner.clone(), inner.clone(), prop::sample::select(vec!["min", "max"]))
                .prop_map(|(a, b, f)| format!("{f}({a}, {b})")),
            (inner.clone(), inner.clone(), inner).prop_map(|(c, a, b)| format!("ifpos({c}, {a}, {b})")),
        ]
    })
}

fn same_bits(a: Result<f64, impl std::fmt::Debug>, b: Result<f64, impl std::fmt::Debug>) -> bool {
    match (a, b) {
        (Ok(a), Ok(b)) => a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
        (Err(_), Err(_)) => true,
        _ => false,
    }
}

const SMOOTH: [&str; 8] = [
    "x^2*y + sin(x)",
    "exp(x*y/4) - cos(y)",
    "ln(1 + x^2 + y^2)",
    "sqrt(2 + x^2)*y",
    "cbrt(3 + x)*y^3",
    "x/(2 + sin(y))",
    "exp(sin(x + y))",
    "(1 + x^2)^(-1/2) * y",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_parse_round_trip(src in tree(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let e = ExprFunction::parse(&src, &VARS).unwrap();
        let again = ExprFunction::parse(&e.print(), &VARS).unwrap();
        prop_assert!(same_bits(e.eval(&[x, y]), again.eval(&[x, y])), "{src} -> {}", e.print());
    }

    #[test]
    fn evaluation_is_deterministic(src in tree(), x in -3.0f64..3.0, y in -3.0f64..3.0) {
        let e = ExprFunction::parse(&src, &VARS).unwrap();
        prop_assert!(same_bits(e.eval(&[x, y]), e.eval(&[x, y])));
    }

    #[test]
    fn gradient_matches_central_differences(k in 0usize..SMOOTH.len(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let e = ExprFunction::parse(SMOOTH[k], &VARS).unwrap();
        let g = e.grad(&[x, y]).unwrap();
        prop_assert!(!g.nondifferentiable);
        let step = 1e-5;
        let fd = [
            (e.eval(&[x + step, y]).unwrap() - e.eval(&[x - step, y]).unwrap()) / (2.0 * step),
            (e.eval(&[x, y + step]).unwrap() - e.eval(&[x, y - step]).unwrap()) / (2.0 * step),
        ];
        for (a, b) in g.values.iter().zip(fd) {
            prop_assert!((a - b).abs() <= 1e-5 * a.abs().max(1.0), "{}: {a} vs {b}", SMOOTH[k]);
        }
    }

    #[test]
    fn cbrt_is_odd(a in 0.0f64..1e6) {
        let e = ExprFunction::parse("cbrt(x)", &["x"]).unwrap();
        let (p, n) = (e.eval(&[a]).unwrap(), e.eval(&[-a]).unwrap());
        prop_assert_eq!(n.to_bits(), (-p).to_bits());
    }
}

#[test]
fn kinks_are_flagged_not_errors() {
    let e = ExprFunction::parse("abs(x) + max(x, y)", &VARS).unwrap();
    let g = e.grad(&[0.0, 0.0]).unwrap();
    assert!(g.nondifferentiable);
    assert!(g.values.iter().all(|v| v.is_finite()));
}
