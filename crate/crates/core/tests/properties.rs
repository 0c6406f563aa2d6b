mod common;

use common::{close, eval_all, expr, expr_with, point_expr, symbols};
use jetcas::conservation::ConservedVector;
use jetcas::expr::{normalize, substitute, Bindings};
use jetcas::jet::{euler_operator, multi_indices, prolong, total_derivative, VectorField};
use jetcas::report::symbolic_zero;
use jetcas::{parse, print_canonical, BaseVar, Expr};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn parser_round_trip(e in expr()) {
        let text = print_canonical(&e);
        let back = parse(&text, &symbols()).unwrap();
        prop_assert_eq!(back, e, "{}", text);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normalize_is_idempotent(e in expr()) {
        let once = normalize(&e);
        prop_assert_eq!(&once, &e);
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn evaluation_respects_sums_and_products(a in expr(), b in expr(), trial in 0usize..1000) {
        let (sum, prod) = (&a + &b, &a * &b);
        if let Some(v) = eval_all(&[&a, &b, &sum, &prod], trial) {
            prop_assert!(close(v[2], v[0] + v[1]), "{} vs {}", v[2], v[0] + v[1]);
            prop_assert!(close(v[3], v[0] * v[1]), "{} vs {}", v[3], v[0] * v[1]);
        }
    }

    #[test]
    fn differentiation_is_linear(a in expr(), b in expr(), k in -3i64..=3) {
        for wrt in [Expr::x(), Expr::u(), Expr::jet(0, 1, 0)] {
            let lhs = (&a + &(Expr::int(k) * &b)).diff(&wrt);
            let rhs = a.diff(&wrt) + Expr::int(k) * b.diff(&wrt);
            prop_assert!(symbolic_zero(&(lhs - rhs)));
        }
    }

    #[test]
    fn substitutions_of_distinct_keys_commute(e in expr(), p in point_expr(), q in point_expr()) {
        prop_assume!(!p.contains_var(BaseVar::T) && !q.contains_var(BaseVar::X));
        let one = e.subs(&Expr::x(), &p).subs(&Expr::t(), &q);
        let mut both = Bindings::new();
        both.insert(Expr::x(), p.clone());
        both.insert(Expr::t(), q.clone());
        let simultaneous = substitute(&e, &both);
        let other = e.subs(&Expr::t(), &q).subs(&Expr::x(), &p);
        prop_assert!(symbolic_zero(&(&one - &simultaneous)));
        prop_assert!(symbolic_zero(&(&other - &simultaneous)));
    }

    #[test]
    fn euler_operator_annihilates_divergences(
        p1 in expr_with(1, 2, false),
        p2 in expr_with(1, 2, false),
        p3 in expr_with(1, 2, false),
    ) {
        let div = ConservedVector::new(p1, p2, p3).unwrap().divergence();
        let e = euler_operator(&div).unwrap();
        prop_assert!(symbolic_zero(&e), "E_U(Div) = {}", e);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn total_derivatives_commute(e in expr()) {
        let xy = total_derivative(&total_derivative(&e, BaseVar::X), BaseVar::Y);
        let yx = total_derivative(&total_derivative(&e, BaseVar::Y), BaseVar::X);
        prop_assert!(symbolic_zero(&(xy - yx)));
    }
}

fn field() -> impl Strategy<Value = VectorField> {
    (point_expr(), point_expr(), point_expr(), point_expr()).prop_map(|(a, b, c, d)| VectorField::new(a, b, c, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn prolongation_is_linear(v in field(), w in field(), k in -3i64..=3) {
        let sum = v.plus(&w.scale(&Expr::int(k)));
        let (pv, pw, ps) = (prolong(&v, 2).unwrap(), prolong(&w, 2).unwrap(), prolong(&sum, 2).unwrap());
        for j in multi_indices(2) {
            let lhs = ps.coefficient(j).unwrap();
            let rhs = pv.coefficient(j).unwrap() + Expr::int(k) * pw.coefficient(j).unwrap();
            prop_assert!(symbolic_zero(&(lhs - &rhs)), "{:?}", j);
        }
    }
}
