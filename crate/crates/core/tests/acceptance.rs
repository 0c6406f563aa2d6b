mod common;

use std::path::PathBuf;
use std::time::Instant;

use jetcas::conservation::{
    construct_fluxes, multiplier_determining_system, on_shell_divergence, reduce_determining_system, verify_divergence_identity,
    verify_multiplier,
};
use jetcas::jet::{euler_operator, invariance_residual, multi_indices, prolong, total_derivative, VectorField};
use jetcas::numeric::{simulate_ricci, SamplePlan};
use jetcas::problem::Problem;
use jetcas::reduction::{equivalent_up_to_factor, numeric_agreement, reduce_by_ansatz, verify_solution, Equivalence};
use jetcas::report::{symbolic_zero, ResidualReport, Verdict};
use jetcas::symmetry::{conslaw_symmetry_residual, decompose_in_basis, general_ricci_field, ricci_basis};
use jetcas::{parse, print_canonical, BaseVar, Expr, Formal, SymbolTable};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EQUATION: &str = "u_t - u_xy/u + u_x*u_y/u^2";
const AGREEMENT_TOL: f64 = 1e-9;
const AGREEMENT_POINTS: usize = 50;
const DRIFT_LIMIT: f64 = 1e-6;
const SEPARABLE_DRIFT_LIMIT: f64 = 1e-12;
const CONVERGENCE_RATIO: f64 = 4.0;

/// Criteria whose failure is a recorded discrepancy with the printed source.
const DOCUMENTED_FAILURES: [u32; 3] = [1, 6, 11];

struct Outcome {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn corpus(name: &str) -> Problem {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/corpus").join(name);
    Problem::load(&path).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn plan() -> SamplePlan {
    SamplePlan::default()
}

fn table() -> SymbolTable {
    SymbolTable::new()
        .with_function("L", &[Formal::T, Formal::X, Formal::Y, Formal::U])
        .with_function("f", &[Formal::X])
        .with_function("g", &[Formal::Y])
}

fn e(s: &str) -> Expr {
    parse(s, &table()).unwrap()
}

fn timed(limit_s: f64, detail: &mut String, start: Instant) -> bool {
    let secs = start.elapsed().as_secs_f64();
    detail.push_str(&format!("; {secs:.2} s (limit {limit_s} s)"));
    secs < limit_s
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let printed = corpus("ricci_euler.json");
    let corrected = corpus("ricci_euler_corrected.json");
    let computed = euler_operator(&(printed.multiplier.as_ref().unwrap() * &printed.equation)).unwrap();
    let literal = symbolic_zero(&(&computed - printed.expected.euler.as_ref().unwrap()));
    let fixed = symbolic_zero(&(&computed - corrected.expected.euler.as_ref().unwrap()));
    let mut detail = format!(
        "matches printed form: {literal}; matches form with 1/u on the L_yu*u_x and L_xu*u_y terms: {fixed}"
    );
    let fast = timed(1.0, &mut detail, start);
    Outcome { id: 1, title: "Euler operator reproduces the multiplier PDE", pass: literal && fast, detail }
}

fn criterion_2() -> Outcome {
    let t = table();
    let lambda = t.function("L").unwrap().clone();
    let sys = reduce_determining_system(&multiplier_determining_system(&e(EQUATION), &lambda).unwrap(), &lambda);
    let mut got: Vec<String> = sys.coefficients().iter().map(print_canonical).collect();
    got.sort();
    let mut want: Vec<String> =
        ["D(L(t, x, y, u), u)", "D(L(t, x, y, u), t)", "D(L(t, x, y, u), x, y)"].iter().map(|s| print_canonical(&e(s))).collect();
    want.sort();
    Outcome {
        id: 2,
        title: "multiplier determining system is {L_u, L_t, L_xy}",
        pass: got == want,
        detail: format!("generated {got:?}"),
    }
}

fn criterion_3() -> Outcome {
    let t = table();
    let lambda = t.function("L").unwrap().clone();
    let sys = reduce_determining_system(&multiplier_determining_system(&e(EQUATION), &lambda).unwrap(), &lambda);
    let check = |c: &str| verify_multiplier(&sys, &lambda, &e(c), &t, &plan()).unwrap();
    let failing_coefficient = |c: &str| {
        let r = check(c);
        r.first_failure.and_then(|m| sys.equations.iter().find(|q| q.monomial.to_string() == m).map(|q| q.coefficient.clone()))
    };
    let general = check("f(x) + g(y)").passed;
    let u_fails = failing_coefficient("u") == Some(e("D(L(t,x,y,u),u)"));
    let xy_fails = failing_coefficient("x*y") == Some(e("D(L(t,x,y,u),x,y)"));
    Outcome {
        id: 3,
        title: "f(x)+g(y) passes; u and x*y fail their designated equations",
        pass: general && u_fails && xy_fails,
        detail: format!("f+g passes: {general}; u fails L_u: {u_fails}; x*y fails L_xy: {xy_fails}"),
    }
}

fn criterion_4() -> Outcome {
    let (f, g) = (e("f(x)"), e("g(y)"));
    let p = construct_fluxes(&f, &g).unwrap();
    let off = verify_divergence_identity(&(&f + &g), &e(EQUATION), &p, &plan());
    let on = on_shell_divergence(&e(EQUATION), &p).unwrap();
    let pass = off.is_zero() && off.symbolic_zero && symbolic_zero(&on);
    Outcome {
        id: 4,
        title: "divergence identity off shell and conservation on shell",
        pass,
        detail: format!("off shell {:?}; on shell zero: {}", off.verdict, symbolic_zero(&on)),
    }
}

fn criterion_5() -> Outcome {
    let mut bad = Vec::new();
    for file in ["x1.json", "x2.json", "x3.json", "x4.json", "x5.json", "x6.json", "case2_xi.json", "case2_eta.json"] {
        let p = corpus(file);
        let r = conslaw_symmetry_residual(p.operator.as_ref().unwrap(), p.fluxes.as_ref().unwrap()).unwrap();
        if !r.is_zero() {
            bad.push(file);
        }
    }
    Outcome {
        id: 5,
        title: "symmetry link residual vanishes for X1-X6 and both Case II operators",
        pass: bad.is_empty(),
        detail: if bad.is_empty() { "8/8 zero".into() } else { format!("nonzero for {bad:?}") },
    }
}

fn criterion_6() -> Outcome {
    let mut mismatches = Vec::new();
    for file in ["x1.json", "x2.json", "x3.json", "x4.json", "x5.json", "x6.json"] {
        let p = corpus(file);
        let d = decompose_in_basis(p.operator.as_ref().unwrap(), &ricci_basis()).unwrap();
        for (i, (a, b)) in d.coefficients.iter().zip(p.expected.decomposition.as_ref().unwrap()).enumerate() {
            if !symbolic_zero(&(a - b)) {
                mismatches.push(format!("{file} V{}: computed {a}, printed {b}", i + 1));
            }
        }
    }
    let detail = if mismatches.is_empty() { "all coefficients match".into() } else { mismatches.join("; ") };
    Outcome { id: 6, title: "basis decompositions match coefficient for coefficient", pass: mismatches.is_empty(), detail }
}

fn random_poly(rng: &mut ChaCha8Rng, var: Expr) -> Expr {
    Expr::add((0..=3).map(|k| Expr::int(rng.gen_range(-5..=5)) * Expr::pow(var.clone(), k)))
}

fn criterion_7() -> Outcome {
    let delta = e(EQUATION);
    let mut failures = 0;
    for v in ricci_basis() {
        if !symbolic_zero(&invariance_residual(&v, &delta).unwrap()) {
            failures += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let xi = random_poly(&mut rng, Expr::x());
        let eta = random_poly(&mut rng, Expr::y());
        let (c1, c2) = (Expr::int(rng.gen_range(-5..=5)), Expr::int(rng.gen_range(-5..=5)));
        let v = general_ricci_field(&c1, &c2, &xi, &eta);
        if !symbolic_zero(&invariance_residual(&v, &delta).unwrap()) {
            failures += 1;
        }
    }
    Outcome {
        id: 7,
        title: "classical invariance for V1-V6 and 50 random general fields",
        pass: failures == 0,
        detail: format!("{failures} of 56 residuals nonzero"),
    }
}

fn criterion_8() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for (file, exact) in [
        ("x1.json", true),
        ("case2_xi_reduce.json", true),
        ("x2.json", false),
        ("x3.json", false),
        ("x4.json", false),
        ("x5.json", false),
        ("x6.json", false),
    ] {
        let p = corpus(file);
        let reduced = reduce_by_ansatz(&p.equation, p.ansatz.as_ref().unwrap(), &plan()).unwrap();
        let want = p.expected.reduced.as_ref().unwrap();
        let eq = equivalent_up_to_factor(&reduced, want).unwrap();
        if exact {
            pass &= eq == Equivalence::Equivalent;
            notes.push(format!("{file}: {eq:?}"));
        } else {
            let agreement = numeric_agreement(&reduced, want, &plan(), AGREEMENT_POINTS).unwrap();
            pass &= agreement < AGREEMENT_TOL;
            notes.push(format!("{file}: {eq:?}, disagreement {agreement:.1e}"));
        }
    }
    Outcome { id: 8, title: "similarity reductions reproduce the reduced equations", pass, detail: notes.join("; ") }
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for file in ["x1.json", "x2.json", "x3.json", "x4.json", "case2_xi.json", "case2_eta.json", "x5.json"] {
        let p = corpus(file);
        let r = verify_solution(&p.equation, p.solution.as_ref().unwrap(), &plan()).unwrap();
        pass &= r.verdict == Verdict::Zero;
        if r.verdict != Verdict::Zero {
            notes.push(format!("{file}: {:?}", r.verdict));
        }
    }
    let p = corpus("x6.json");
    let r = verify_solution(&p.equation, p.solution.as_ref().unwrap(), &plan()).unwrap();
    let t = SymbolTable::new().with_constants(&["n1", "n4"]);
    let want_residual = parse("-3*n1*u/(n1*t + 3*n4)", &t).unwrap();
    let constraint_ok = r.verdict == Verdict::Constrained
        && r.constraints == [Expr::konst("n1")]
        && symbolic_zero(&(&r.residual - &want_residual));
    pass &= constraint_ok;
    notes.push(format!("u6: {:?} {:?}, residual {}", r.verdict, r.constraints.iter().map(print_canonical).collect::<Vec<_>>(), r.residual));
    Outcome { id: 9, title: "invariant solutions verify; u6 needs n1 = 0", pass, detail: notes.join("; ") }
}

fn run_property<S: Strategy>(cases: u32, seed: u8, strategy: S, mut test: impl FnMut(S::Value) -> bool) -> u32 {
    let config = Config { cases, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, proptest::test_runner::TestRng::from_seed(
        proptest::test_runner::RngAlgorithm::ChaCha,
        &[seed; 32],
    ));
    let mut failures = 0;
    for _ in 0..cases {
        let value = strategy.new_tree(&mut runner).expect("strategy produces values").current();
        if !test(value) {
            failures += 1;
        }
    }
    failures
}

/// Symbolic and numeric verdicts of every corpus residual, plus perturbed copies.
fn corpus_agreement() -> (usize, usize) {
    let mut residuals = Vec::new();
    for file in ["x1.json", "x2.json", "x3.json", "x4.json", "x5.json", "x6.json", "case2_xi.json", "case2_eta.json"] {
        let p = corpus(file);
        let v = p.operator.as_ref().unwrap();
        residuals.extend(conslaw_symmetry_residual(v, p.fluxes.as_ref().unwrap()).unwrap().r);
        residuals.push(invariance_residual(v, &p.equation).unwrap());
    }
    let general = corpus("general.json");
    residuals.push(invariance_residual(general.operator.as_ref().unwrap(), &general.equation).unwrap());
    let fl = corpus("ricci_fluxes.json");
    let p = fl.fluxes.as_ref().unwrap();
    residuals.push(jetcas::conservation::divergence_residual(fl.multiplier.as_ref().unwrap(), &fl.equation, p));
    residuals.push(on_shell_divergence(&fl.equation, p).unwrap());
    let perturbed: Vec<Expr> = residuals.iter().map(|r| r + &(Expr::x() * Expr::u())).collect();
    let mut agree = 0;
    let total = residuals.len() + perturbed.len();
    for r in residuals.iter().chain(&perturbed) {
        let rep = ResidualReport::evaluate(r.clone(), &plan());
        let numeric_zero = rep.numeric.verdict == jetcas::numeric::NumericVerdict::Zero;
        if rep.symbolic_zero == numeric_zero {
            agree += 1;
        }
    }
    (agree, total)
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let syms = common::symbols();
    let roundtrip = run_property(500, 1, common::expr(), |e| parse(&print_canonical(&e), &syms).ok() == Some(e));
    let div = (common::expr_with(1, 2, false), common::expr_with(1, 2, false), common::expr_with(1, 2, false));
    let euler_div = run_property(200, 2, div, |(a, b, c)| {
        let d = jetcas::conservation::ConservedVector::new(a, b, c).unwrap().divergence();
        symbolic_zero(&euler_operator(&d).unwrap())
    });
    let commute = run_property(100, 3, common::expr(), |e| {
        let xy = total_derivative(&total_derivative(&e, BaseVar::X), BaseVar::Y);
        let yx = total_derivative(&total_derivative(&e, BaseVar::Y), BaseVar::X);
        symbolic_zero(&(xy - yx))
    });
    let field = || {
        (common::point_expr(), common::point_expr(), common::point_expr(), common::point_expr())
            .prop_map(|(a, b, c, d)| VectorField::new(a, b, c, d).unwrap())
    };
    let linear = run_property(50, 4, (field(), field()), |(v, w)| {
        let sum = v.plus(&w);
        let (pv, pw, ps) = (prolong(&v, 2).unwrap(), prolong(&w, 2).unwrap(), prolong(&sum, 2).unwrap());
        multi_indices(2)
            .into_iter()
            .all(|j| symbolic_zero(&(ps.coefficient(j).unwrap() - pv.coefficient(j).unwrap() - pw.coefficient(j).unwrap())))
    });
    let (agree, total) = corpus_agreement();
    let mut detail = format!(
        "failures: round-trip {roundtrip}/500, E_U(Div) {euler_div}/200, DxDy {commute}/100, prolongation {linear}/50; \
         symbolic/numeric agreement {agree}/{total}"
    );
    let fast = timed(30.0, &mut detail, start);
    let pass = roundtrip + euler_div + commute + linear == 0 && agree == total && fast;
    Outcome { id: 10, title: "property suites", pass, detail }
}

fn criterion_11() -> Outcome {
    let start = Instant::now();
    let t = SymbolTable::new();
    let p = |s: &str| parse(s, &t).unwrap();
    let (u0, f, g) = (p("2 + 0.5*sin(x)*sin(y)"), p("sin(x)"), p("cos(y)"));
    let fine = simulate_ricci(&u0, &f, &g, 64, 0.5).unwrap();
    let coarse = simulate_ricci(&u0, &f, &g, 32, 0.5).unwrap();
    let separable = simulate_ricci(&p("(2 + sin(x))*(2 + cos(y))"), &f, &g, 64, 0.5).unwrap();
    let (d64, d32, ds) = (fine.summary.max_drift, coarse.summary.max_drift, separable.summary.max_drift);
    let small = d64 < DRIFT_LIMIT;
    let converges = d64 * CONVERGENCE_RATIO <= d32;
    let stationary = ds < SEPARABLE_DRIFT_LIMIT;
    let mut detail = format!(
        "drift N=64 {d64:.2e} (< {DRIFT_LIMIT:e}: {small}); drift N=32 {d32:.2e}; ratio >= {CONVERGENCE_RATIO}: {converges}; \
         separable drift {ds:.2e} (< {SEPARABLE_DRIFT_LIMIT:e}: {stationary})"
    );
    let fast = timed(10.0, &mut detail, start);
    Outcome { id: 11, title: "numeric conservation of Q", pass: small && converges && stationary && fast, detail }
}

fn main() {
    let outcomes = [
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        criterion_11(),
    ];
    for o in &outcomes {
        println!("criterion {:>2}: {} | {} | {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.title, o.detail);
    }
    let unexpected: Vec<u32> =
        outcomes.iter().filter(|o| !o.pass && !DOCUMENTED_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    if !unexpected.is_empty() {
        println!("undocumented failures: {unexpected:?}");
        std::process::exit(1);
    }
}
