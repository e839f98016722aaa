use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::expr::equiv::is_zero_on;

fn p(text: &str) -> Expr {
    parse(text).unwrap_or_else(|e| panic!("parse `{text}`: {e}"))
}

fn pt(x1: f64, x2: f64, x3: f64, t: f64) -> Point {
    Point::new(x1, x2, x3, t)
}

/// Independent oracle: central finite difference of `e` in `v` at `p`.
fn central_diff(e: &Expr, v: Var, point: &Point, h: f64) -> f64 {
    let shifted = |sign: f64| {
        let mut q = point.clone();
        match v {
            Var::X1 => q.x1 += sign * h,
            Var::X2 => q.x2 += sign * h,
            Var::X3 => q.x3 += sign * h,
            Var::T => q.t += sign * h,
        }
        eval(e, &q).expect("oracle point is safe")
    };
    (shifted(1.0) - shifted(-1.0)) / (2.0 * h)
}

/// Deterministic low-discrepancy-ish points inside a box away from zero.
fn oracle_points(n: usize, lo: f64, hi: f64) -> Vec<Point> {
    (0..n)
        .map(|i| {
            let f = |k: u64| {
                let golden = 0.618_033_988_749_894_9_f64;
                let v = ((i as u64 * 7 + k) as f64 * golden).fract();
                lo + v * (hi - lo)
            };
            pt(f(1), f(2), f(3), f(4).abs())
        })
        .collect()
}

#[test]
fn parse_builds_expected_trees() {
    assert_eq!(
        p("x1*x2 + sin(t)"),
        Expr::binary(
            BinOp::Add,
            Expr::binary(BinOp::Mul, Expr::x1(), Expr::x2()),
            Expr::unary(UnaryFn::Sin, Expr::t()),
        )
    );
    assert_eq!(
        p("x3^2/2"),
        Expr::binary(
            BinOp::Div,
            Expr::binary(BinOp::Pow, Expr::x3(), Expr::num(2.0)),
            Expr::num(2.0),
        )
    );
    // cylindrical map component
    assert_eq!(
        p("atan(x2/x1)"),
        Expr::unary(UnaryFn::Atan, Expr::binary(BinOp::Div, Expr::x2(), Expr::x1()))
    );
    assert_eq!(p("pi"), Expr::num(std::f64::consts::PI));
    // any other identifier is a parameter
    assert_eq!(p("lambda1"), Expr::param("lambda1"));
}

#[test]
fn parse_precedence_and_associativity() {
    // ^ binds tighter than unary minus, which binds tighter than *
    assert_eq!(p("-x1^2"), Expr::unary(UnaryFn::Neg, p("x1^2")));
    assert_eq!(p("2^3^2"), p("2^(3^2)"));
    assert_eq!(p("1-2-x1"), Expr::binary(BinOp::Sub, p("1-2"), Expr::x1()));
    assert_eq!(p("x1^-2"), Expr::binary(BinOp::Pow, Expr::x1(), Expr::num(-2.0)));
    assert_eq!(eval(&p("2*3+4"), &pt(0.0, 0.0, 0.0, 0.0)).unwrap(), 10.0);
    assert_eq!(eval(&p("2+3*4"), &pt(0.0, 0.0, 0.0, 0.0)).unwrap(), 14.0);
    assert_eq!(eval(&p("2^3^2"), &pt(0.0, 0.0, 0.0, 0.0)).unwrap(), 512.0);
    assert_eq!(eval(&p("1e2 + 2.5e-1"), &pt(0.0, 0.0, 0.0, 0.0)).unwrap(), 100.25);
}

#[test]
fn parse_reports_positions() {
    match parse("x1 + + x2") {
        Err(ParseError::Syntax { position, .. }) => assert_eq!(position, 5),
        other => panic!("expected syntax error, got {other:?}"),
    }
    match parse("x1 + foo(x2)") {
        Err(ParseError::UnknownFunction { name, position }) => {
            assert_eq!(name, "foo");
            assert_eq!(position, 5);
        }
        other => panic!("expected unknown function, got {other:?}"),
    }
    assert!(parse("(x1+x2").is_err());
    assert!(parse("x1 x2").is_err());
}

#[test]
fn eval_examples() {
    assert_eq!(
        eval(&p("x1^2/2 + x2^2/2"), &pt(3.0, 4.0, 0.0, 0.0)).unwrap(),
        12.5
    );
    // the quadratic Hamilton function at x3 = 2
    assert_eq!(eval(&p("x3^2/2"), &pt(0.0, 0.0, 2.0, 0.0)).unwrap(), 2.0);
    // the plane through (1,1,1)
    assert_eq!(eval(&p("x1+x2+x3"), &pt(1.0, 1.0, 1.0, 0.0)).unwrap(), 3.0);
}

#[test]
fn eval_error_cases() {
    let origin = pt(0.0, 0.0, 0.0, 0.0);
    assert!(matches!(
        eval(&p("a*x1"), &origin),
        Err(EvalError::UnboundParameter(name)) if name == "a"
    ));
    assert_eq!(
        eval(&p("a"), &origin.clone().with_param("a", 3.5)).unwrap(),
        3.5
    );
    assert!(matches!(eval(&p("1/x1"), &origin), Err(EvalError::DivisionByZero)));
    assert!(matches!(eval(&p("ln(0-1)"), &origin), Err(EvalError::LogDomain { .. })));
    assert!(matches!(eval(&p("sqrt(0-1)"), &origin), Err(EvalError::SqrtDomain { .. })));
    // fractional power of a negative base
    assert!(matches!(
        eval(&p("(0-2)^0.5"), &origin),
        Err(EvalError::PowDomain { .. })
    ));
    // integer power of a negative base is fine
    assert_eq!(eval(&p("(0-2)^3"), &origin).unwrap(), -8.0);
}

#[test]
fn diff_trivial_cases() {
    let d = Domain::default();
    let r = equiv(&diff(&p("x1^2/2"), Var::X1), &p("x1"), &d).unwrap();
    assert!(r.equivalent, "residual {}", r.max_residual);
    let r = equiv(&diff(&p("sin(t)*x2"), Var::T), &p("cos(t)*x2"), &d).unwrap();
    assert!(r.equivalent);
    // parameters are constants
    assert!(diff(&p("a*b+c"), Var::X1).is_zero());
}

#[test]
fn diff_atan_quotient_matches_finite_differences() {
    // derived oracle: ∂/∂x2 atan(x2/x1) = x1/(x1^2+x2^2), checked against
    // central differences at 10 safe points
    let e = p("atan(x2/x1)");
    let derivative = diff(&e, Var::X2);
    let closed_form = p("x1/(x1^2+x2^2)");
    for point in oracle_points(10, 0.5, 2.0) {
        let fd = central_diff(&e, Var::X2, &point, 1e-6);
        let sym = eval(&derivative, &point).unwrap();
        let closed = eval(&closed_form, &point).unwrap();
        assert!((sym - fd).abs() <= 1e-6 * fd.abs().max(1.0), "fd {fd} vs {sym}");
        assert!((sym - closed).abs() <= 1e-12);
    }
}

#[test]
fn diff_matches_finite_differences_per_node_type() {
    // every function node type against the central-difference oracle at 32
    // safe points, 1e-5 relative
    let cases = [
        "x1+x2*x3",
        "x1-x3",
        "x1*x2",
        "x1/x2",
        "x1^3",
        "x1^2.5",
        "sin(x1*x2)",
        "cos(x1+x3)",
        "tan(x1/4)",
        "atan(x2)",
        "exp(x1-x2)",
        "ln(x1+x2)",
        "sqrt(x1*x3)",
        "-(x1*x2)",
        "x2^x1",
    ];
    for text in cases {
        let e = p(text);
        for v in [Var::X1, Var::X2, Var::X3] {
            let derivative = diff(&e, v);
            for point in oracle_points(32, 0.6, 1.8) {
                let fd = central_diff(&e, v, &point, 1e-5);
                let sym = eval(&derivative, &point).unwrap();
                let scale = fd.abs().max(1.0);
                assert!(
                    (sym - fd).abs() <= 1e-5 * scale,
                    "{text} d/d{v:?}: fd {fd} vs symbolic {sym}"
                );
            }
        }
    }
}

#[test]
fn simplify_examples() {
    assert_eq!(simplify(&p("x1*1 + 0")), Expr::x1());
    assert_eq!(simplify(&p("2*3")), Expr::num(6.0));
    assert_eq!(simplify(&p("x1^0")), Expr::one());
    assert_eq!(simplify(&p("x1^1")), Expr::x1());
    assert_eq!(simplify(&p("0*sin(x2)")), Expr::zero());
    assert_eq!(simplify(&p("-(-x2)")), Expr::x2());
    assert_eq!(simplify(&p("x1-x1")), Expr::zero());
    // constants merge through nested products and divisions
    assert_eq!(simplify(&(p("2*x2") * Expr::num(2.0) / Expr::num(4.0))), Expr::x2());
}

#[test]
fn equiv_examples() {
    let d = Domain::default();
    let r = equiv(&p("sin(t)^2 + cos(t)^2"), &Expr::one(), &d).unwrap();
    assert!(r.equivalent);
    assert!(r.max_residual <= 1e-12);

    let r = equiv(&p("x1"), &p("x2"), &d).unwrap();
    assert!(!r.equivalent);

    // domain exhausted: ln is nowhere defined on a negative box
    let bad = Domain::default().with_x1(-2.0, -1.0);
    assert!(matches!(
        equiv(&p("ln(x1)"), &Expr::one(), &bad),
        Err(EquivError::DomainExhausted { .. })
    ));

    // resampling tolerates a partially unsafe box
    let half = Domain::default().with_x1(-1.0, 2.0);
    let r = equiv(&p("ln(x1)+0"), &p("ln(x1)"), &half).unwrap();
    assert!(r.equivalent);
}

#[test]
fn equiv_binds_domain_parameters() {
    let d = Domain::default().with_param("a", 3.0);
    let r = equiv(&p("a*x1"), &p("3*x1"), &d).unwrap();
    assert!(r.equivalent);
    // unbound parameter is a hard error, not a resample
    let bare = Domain::default();
    assert!(matches!(
        equiv(&p("a*x1"), &p("3*x1"), &bare),
        Err(EquivError::Eval(EvalError::UnboundParameter(_)))
    ));
}

#[test]
fn jacobian3_examples() {
    let d = Domain::default();
    let identity = jacobian3(&[Expr::x1(), Expr::x2(), Expr::x3()], Var::COORDS);
    for (i, row) in identity.iter().enumerate() {
        for (j, entry) in row.iter().enumerate() {
            let want = if i == j { Expr::one() } else { Expr::zero() };
            assert_eq!(*entry, want);
        }
    }

    let scaled = jacobian3(&[p("a*x1"), p("b*x2"), p("c*x3")], Var::COORDS);
    let db = Domain::default()
        .with_param("a", 2.0)
        .with_param("b", 3.0)
        .with_param("c", 5.0);
    for (i, name) in ["a", "b", "c"].iter().enumerate() {
        let r = equiv(&scaled[i][i], &p(name), &db).unwrap();
        assert!(r.equivalent);
    }

    // squared-third-coordinate map: diag(1, 1, 2 x3), checked against the
    // numeric cofactor oracle below as well
    let squared = jacobian3(&[p("x1"), p("x2"), p("x3^2")], Var::COORDS);
    assert!(equiv(&squared[2][2], &p("2*x3"), &d).unwrap().equivalent);
    assert!(squared[0][1].is_zero() && squared[2][0].is_zero());
}

/// Numeric determinant oracle: finite-difference Jacobian entries, then
/// the rule of Sarrus, fully independent of the symbolic path.
fn numeric_jacobian_det(fs: &[Expr; 3], point: &Point) -> f64 {
    let mut m = [[0.0; 3]; 3];
    for (i, f) in fs.iter().enumerate() {
        for (j, v) in Var::COORDS.iter().enumerate() {
            m[i][j] = central_diff(f, *v, point, 1e-6);
        }
    }
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

#[test]
fn jacobian3_det_matches_numeric_oracle() {
    let maps: [[Expr; 3]; 3] = [
        [p("x1"), p("x2"), p("x3^2")],
        [p("x1*x2"), p("x2+x3"), p("sin(x1)+x3")],
        [p("x1+x2^2"), p("x2"), p("x3+x2^3")],
    ];
    for fs in &maps {
        let det = jacobian3_det(fs, Var::COORDS);
        for point in oracle_points(8, 0.4, 1.6) {
            let numeric = numeric_jacobian_det(fs, &point);
            let symbolic = eval(&det, &point).unwrap();
            assert!(
                (numeric - symbolic).abs() <= 1e-5 * numeric.abs().max(1.0),
                "numeric {numeric} vs symbolic {symbolic}"
            );
        }
    }
}

#[test]
fn substitute_and_bind_params() {
    let e = p("x1^2 + a*x2");
    let composed = e.substitute(&[p("x2"), p("x3+1"), Expr::zero()]);
    assert_eq!(composed, p("x2^2 + a*(x3+1)"));

    let mut bindings = BTreeMap::new();
    bindings.insert("a".to_string(), 2.0);
    assert_eq!(e.bind_params(&bindings), p("x1^2 + 2*x2"));
    assert_eq!(e.param_names().into_iter().collect::<Vec<_>>(), vec!["a"]);
}

#[test]
fn printer_round_trips_awkward_trees() {
    let trees = [
        Expr::binary(BinOp::Sub, Expr::x1(), Expr::num(-1.0)),
        Expr::binary(BinOp::Pow, Expr::num(-2.0), Expr::x1()),
        Expr::binary(BinOp::Pow, Expr::x1(), Expr::unary(UnaryFn::Neg, Expr::x2())),
        Expr::unary(UnaryFn::Neg, Expr::unary(UnaryFn::Neg, Expr::x3())),
        Expr::binary(BinOp::Mul, Expr::x1(), Expr::unary(UnaryFn::Neg, Expr::x2())),
        Expr::binary(BinOp::Div, Expr::x1(), Expr::binary(BinOp::Div, Expr::x2(), Expr::x3())),
        Expr::binary(
            BinOp::Pow,
            Expr::binary(BinOp::Pow, Expr::x1(), Expr::num(2.0)),
            Expr::num(3.0),
        ),
        Expr::num(std::f64::consts::PI),
        Expr::num(1.0e-9),
    ];
    for e in &trees {
        let text = e.to_string();
        let back = parse(&text).unwrap_or_else(|err| panic!("reparse `{text}`: {err}"));
        assert_eq!(&back, e, "through `{text}`");
    }
}

// random expression trees that are total on all of R^3 x R
fn arb_safe_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0..4i32).prop_map(|n| Expr::num(n as f64)),
        Just(Expr::x1()),
        Just(Expr::x2()),
        Just(Expr::x3()),
        Just(Expr::t()),
    ];
    leaf.prop_recursive(5, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a - b),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b),
            inner.clone().prop_map(|a| -a),
            inner.clone().prop_map(|a| a.sin()),
            inner.clone().prop_map(|a| a.cos()),
            (inner, 2..4i32).prop_map(|(a, n)| a.powi(n)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn print_parse_is_identity(e in arb_safe_expr()) {
        let text = e.to_string();
        let back = parse(&text).unwrap();
        prop_assert_eq!(back, e);
    }

    #[test]
    fn diff_is_linear(a in arb_safe_expr(), b in arb_safe_expr()) {
        let d = Domain::default();
        let lhs = diff(&(a.clone() + b.clone()), Var::X2);
        let rhs = diff(&a, Var::X2) + diff(&b, Var::X2);
        let r = equiv(&lhs, &rhs, &d).unwrap();
        prop_assert!(r.equivalent, "residual {}", r.max_residual);
    }

    #[test]
    fn diff_product_rule(a in arb_safe_expr(), b in arb_safe_expr()) {
        let d = Domain::default();
        let lhs = diff(&(a.clone() * b.clone()), Var::X1);
        let rhs = a.clone() * diff(&b, Var::X1) + b * diff(&a, Var::X1);
        let r = equiv(&lhs, &rhs, &d).unwrap();
        prop_assert!(r.equivalent, "residual {}", r.max_residual);
    }

    #[test]
    fn simplify_preserves_value(e in arb_safe_expr()) {
        let d = Domain::default().with_tol(1e-7);
        let r = equiv(&simplify(&e), &e, &d).unwrap();
        prop_assert!(r.equivalent, "residual {}", r.max_residual);
    }

    #[test]
    fn simplified_diff_still_zero_free(e in arb_safe_expr()) {
        // closure under differentiation: the derivative is a valid tree
        // and evaluates wherever the input does
        let der = diff(&e, Var::X3);
        let r = is_zero_on(&(der.clone() - der), &Domain::default()).unwrap();
        prop_assert!(r.equivalent);
    }
}
