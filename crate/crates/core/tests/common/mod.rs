#![allow(dead_code)]

use jetcas::numeric::{eval_point, SamplePlan};
use jetcas::{Expr, Formal, SymbolTable};
use proptest::prelude::*;

pub fn symbols() -> SymbolTable {
    SymbolTable::new()
        .with_function("f", &[Formal::X])
        .with_function("g", &[Formal::Y])
        .with_function("h", &[Formal::T, Formal::X, Formal::Y, Formal::U])
        .with_constants(&["a", "b"])
}

fn app(name: &str) -> Expr {
    symbols().function(name).unwrap().apply_formal()
}

/// Leaves over `(t, x, y)`, constants, opaque functions and jets up to `max_order`.
pub fn leaf(max_order: u8) -> BoxedStrategy<Expr> {
    let mut leaves: Vec<Expr> = vec![Expr::t(), Expr::x(), Expr::y(), Expr::konst("a"), Expr::konst("b"), app("f"), app("g"), Expr::u()];
    if max_order >= 1 {
        leaves.extend([Expr::jet(1, 0, 0), Expr::jet(0, 1, 0), Expr::jet(0, 0, 1)]);
    }
    if max_order >= 2 {
        leaves.extend([Expr::jet(0, 1, 1), Expr::jet(0, 2, 0)]);
    }
    prop_oneof![
        (-3i64..=3).prop_filter("nonzero", |k| *k != 0).prop_map(Expr::int),
        proptest::sample::select(leaves),
    ]
    .boxed()
}

/// Random canonical expression of bounded depth.
pub fn expr_with(max_order: u8, depth: u32, transcendental: bool) -> BoxedStrategy<Expr> {
    leaf(max_order)
        .prop_recursive(depth, 24, 2, move |inner| {
            let mut arms: Vec<BoxedStrategy<Expr>> = vec![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a + b).boxed(),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| a * b).boxed(),
                (inner.clone(), 2i64..=3).prop_map(|(a, k)| Expr::pow(a, k)).boxed(),
                inner.clone().prop_map(|a| Expr::one() / (Expr::pow(a, 2) + Expr::int(1))).boxed(),
            ];
            if transcendental {
                arms.push(inner.clone().prop_map(Expr::sin).boxed());
                arms.push(inner.clone().prop_map(Expr::cos).boxed());
                arms.push(inner.prop_map(|a| Expr::exp(a.scale_by(jetcas::Rational::new(1.into(), 4.into())))).boxed());
            }
            proptest::strategy::Union::new(arms)
        })
        .boxed()
}

pub fn expr() -> BoxedStrategy<Expr> {
    expr_with(2, 3, true)
}

/// Point-field coefficient in `(t, x, y, u)`.
pub fn point_expr() -> BoxedStrategy<Expr> {
    expr_with(0, 2, true)
}

/// Values of `es` at the same random point of trial `trial`.
pub fn eval_all(es: &[&Expr], trial: usize) -> Option<Vec<f64>> {
    let plan = SamplePlan::default();
    let real = plan.realize(es, trial, 0);
    let point = plan.point(es, trial, 0);
    es.iter().map(|e| eval_point(e, &real, &point, 1e-9).ok()).collect()
}

pub fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-8 * (1.0 + a.abs().max(b.abs()))
}
