//! Seeded random realizations and sampling-based identity tests.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::eval::{jet_name, EvalError, Evaluator, Point, Poly, Realization};
use crate::expr::{BaseVar, Expr, FunctionSymbol, JetVar};
use crate::jet::total_derivative;

/// Sampling configuration. Equal plans give identical realizations and
/// points.
#[derive(Clone, Debug)]
pub struct SamplePlan {
    pub seed: u64,
    pub trials: usize,
    /// Relative zero threshold, scaled by `1 + max intermediate magnitude`.
    pub tol: f64,
    /// Denominator magnitude below which a point is rejected.
    pub guard: f64,
    /// Resampling attempts per trial before the trial counts as guarded.
    pub attempts: usize,
    /// Highest total degree of realized function polynomials.
    pub max_degree: u32,
    /// Box overrides keyed by variable, jet or constant name.
    pub domains: BTreeMap<String, (f64, f64)>,
}

impl Default for SamplePlan {
    fn default() -> Self {
        SamplePlan {
            seed: 42,
            trials: 20,
            tol: 1e-9,
            guard: 1e-6,
            attempts: 8,
            max_degree: 4,
            domains: BTreeMap::new(),
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl SamplePlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_domain(mut self, name: &str, lo: f64, hi: f64) -> Self {
        self.domains.insert(name.to_string(), (lo, hi));
        self
    }

    /// Generator for one (trial, attempt, purpose) triple.
    pub fn rng(&self, trial: usize, attempt: usize, key: &str) -> ChaCha8Rng {
        let tag = format!("{}:{}:{}:{}", self.seed, trial, attempt, key);
        ChaCha8Rng::seed_from_u64(fnv1a(tag.as_bytes()))
    }

    fn domain(&self, name: &str, default: (f64, f64)) -> (f64, f64) {
        self.domains.get(name).copied().unwrap_or(default)
    }

    /// Random polynomial of total degree at most `max_degree` in `arity`
    /// variables with coefficients `k/8` in `[-2, 2]`.
    pub fn random_poly(&self, arity: usize, rng: &mut impl Rng) -> Poly {
        let mut terms = Vec::new();
        for exps in monomials(arity, self.max_degree) {
            let k: i32 = rng.gen_range(-16..=16);
            if k != 0 {
                terms.push((k as f64 / 8.0, exps));
            }
        }
        Poly { terms }
    }

    /// Realizes every function symbol and constant occurring in `exprs`.
    pub fn realize(&self, exprs: &[&Expr], trial: usize, attempt: usize) -> Realization {
        let mut functions: BTreeMap<Arc<str>, Arc<FunctionSymbol>> = BTreeMap::new();
        let mut constants = std::collections::BTreeSet::new();
        for e in exprs {
            for f in e.function_symbols() {
                functions.insert(f.name.clone(), f);
            }
            constants.extend(e.constants());
        }
        let mut out = Realization::default();
        for (name, sym) in functions {
            let mut rng = self.rng(trial, attempt, &format!("fn:{name}"));
            out.functions.insert(name, self.random_poly(sym.arity(), &mut rng));
        }
        for name in constants {
            let mut rng = self.rng(trial, attempt, &format!("const:{name}"));
            let value = match self.domains.get(&*name) {
                Some(&(lo, hi)) => rng.gen_range(lo..=hi),
                None => {
                    let m: f64 = rng.gen_range(0.5..=2.0);
                    if rng.gen_bool(0.5) {
                        m
                    } else {
                        -m
                    }
                }
            };
            out.constants.insert(name, value);
        }
        out
    }

    /// Independent coordinates for every base variable and jet in `exprs`.
    pub fn point(&self, exprs: &[&Expr], trial: usize, attempt: usize) -> Point {
        let mut vars = std::collections::BTreeSet::new();
        let mut jets = std::collections::BTreeSet::new();
        for e in exprs {
            e.walk(&mut |n| match n {
                Expr::Var(v) => {
                    vars.insert(*v);
                }
                Expr::Jet(j) => {
                    jets.insert(*j);
                }
                _ => {}
            });
        }
        let mut p = Point::default();
        for v in vars {
            let mut rng = self.rng(trial, attempt, &format!("var:{}", v.name()));
            let (lo, hi) = self.domain(v.name(), if v == BaseVar::T { (0.0, 1.0) } else { (-2.0, 2.0) });
            p.vars.insert(v, rng.gen_range(lo..=hi));
        }
        for j in jets {
            let name = jet_name(j);
            let mut rng = self.rng(trial, attempt, &format!("jet:{name}"));
            let (lo, hi) = self.domain(&name, if j == JetVar::U { (0.5, 2.0) } else { (-2.0, 2.0) });
            p.jets.insert(j, rng.gen_range(lo..=hi));
        }
        p
    }
}

/// Exponent vectors of total degree at most `max` in `arity` variables.
fn monomials(arity: usize, max: u32) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        let mut next = Vec::new();
        for m in &out {
            let used: u32 = m.iter().sum();
            for k in 0..=(max - used) {
                let mut m2 = m.clone();
                m2.push(k);
                next.push(m2);
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericVerdict {
    Zero,
    Nonzero,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub value: f64,
    pub point: Vec<(String, f64)>,
    pub constants: Vec<(String, f64)>,
}

/// Outcome of [`random_zero_test`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NumericEvidence {
    pub verdict: NumericVerdict,
    /// Largest `|value|` over accepted points.
    pub max_abs: f64,
    /// Largest `|value| / (1 + scale)` over accepted points.
    pub max_relative: f64,
    pub accepted: usize,
    pub guarded: usize,
    pub seed: u64,
    pub witness: Option<Witness>,
}

/// Evaluates `e` at `plan.trials` random points (resampling on guard trips)
/// and decides whether it vanishes.
pub fn random_zero_test(e: &Expr, plan: &SamplePlan) -> NumericEvidence {
    let mut ev = NumericEvidence {
        verdict: NumericVerdict::Zero,
        max_abs: 0.0,
        max_relative: 0.0,
        accepted: 0,
        guarded: 0,
        seed: plan.seed,
        witness: None,
    };
    if let Some(r) = e.as_rational() {
        let v = super::eval::rational_to_f64(r);
        ev.accepted = plan.trials;
        ev.max_abs = v.abs();
        ev.max_relative = v.abs() / (1.0 + v.abs());
        if v != 0.0 {
            ev.verdict = NumericVerdict::Nonzero;
            ev.witness = Some(Witness { value: v, point: Vec::new(), constants: Vec::new() });
        }
        return ev;
    }
    for trial in 0..plan.trials {
        let mut done = false;
        for attempt in 0..plan.attempts.max(1) {
            let real = plan.realize(&[e], trial, attempt);
            let point = plan.point(&[e], trial, attempt);
            match Evaluator::new(&real, &point, plan.guard).run(e) {
                Ok(r) => {
                    let rel = r.value.abs() / (1.0 + r.scale);
                    ev.max_abs = ev.max_abs.max(r.value.abs());
                    if rel > plan.tol && rel > ev.max_relative {
                        ev.witness = Some(Witness {
                            value: r.value,
                            point: point.labelled(),
                            constants: real.constants.iter().map(|(k, &v)| (k.to_string(), v)).collect(),
                        });
                    }
                    ev.max_relative = ev.max_relative.max(rel);
                    ev.accepted += 1;
                    done = true;
                    break;
                }
                Err(EvalError::Guard(_)) => continue,
                Err(EvalError::Unbound(_)) => break,
            }
        }
        if !done {
            ev.guarded += 1;
        }
    }
    ev.verdict = if ev.guarded * 10 > plan.trials * 9 || ev.accepted == 0 {
        NumericVerdict::Undecided
    } else if ev.max_relative > plan.tol {
        NumericVerdict::Nonzero
    } else {
        NumericVerdict::Zero
    };
    ev
}

const FD_STEP: f64 = 1e-5;

/// Realizes `u` as a polynomial field in (t, x, y) and fills every jet
/// needed by `exprs` with its exact derivatives at the point.
fn field_point(field: &Poly, exprs: &[&Expr], txy: [f64; 3]) -> Point {
    let mut p = Point::default();
    for (v, &x) in BaseVar::TXY.iter().zip(&txy) {
        p.vars.insert(*v, x);
    }
    for e in exprs {
        for j in e.jet_vars() {
            let idx = j.index().map(|n| n as u32);
            p.jets.insert(j, field.eval_deriv(&idx, &txy));
        }
    }
    p
}

/// Largest relative deviation `|D_v e − FD| / (1 + |D_v e|)` between the
/// total derivative and a central difference along `v` with `u` realized
/// as a random polynomial field.
pub fn fd_crosscheck(e: &Expr, v: BaseVar, plan: &SamplePlan) -> f64 {
    let slot = v.jet_slot().expect("fd_crosscheck differentiates along t, x or y");
    let de = total_derivative(e, v);
    let mut worst: f64 = 0.0;
    for trial in 0..plan.trials {
        for attempt in 0..plan.attempts.max(1) {
            let real = plan.realize(&[e], trial, attempt);
            let mut rng = plan.rng(trial, attempt, "field");
            let field = plan.random_poly(3, &mut rng);
            let base = plan.point(&[&Expr::t(), &Expr::x(), &Expr::y()], trial, attempt);
            let mut txy = [0.0; 3];
            for (k, bv) in BaseVar::TXY.iter().enumerate() {
                txy[k] = base.vars[bv];
            }
            let eval_at = |shift: f64, target: &Expr| {
                let mut c = txy;
                c[slot] += shift;
                let mut p = field_point(&field, &[target], c);
                for (var, val) in &base.vars {
                    if var.jet_slot().is_none() {
                        p.vars.insert(*var, *val);
                    }
                }
                Evaluator::new(&real, &p, plan.guard).run(target).map(|r| r.value)
            };
            let (Ok(sym), Ok(plus), Ok(minus)) = (eval_at(0.0, &de), eval_at(FD_STEP, e), eval_at(-FD_STEP, e)) else {
                continue;
            };
            let fd = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max((sym - fd).abs() / (1.0 + sym.abs()));
            break;
        }
    }
    worst
}

/// Like [`fd_crosscheck`] but for the partial derivative with respect to a
/// base variable or jet, every other coordinate held fixed.
pub fn fd_crosscheck_partial(e: &Expr, wrt: &Expr, plan: &SamplePlan) -> f64 {
    let de = e.diff(wrt);
    let mut worst: f64 = 0.0;
    for trial in 0..plan.trials {
        for attempt in 0..plan.attempts.max(1) {
            let real = plan.realize(&[e], trial, attempt);
            let point = plan.point(&[e, wrt], trial, attempt);
            let shifted = |h: f64| {
                let mut p = point.clone();
                match wrt {
                    Expr::Var(v) => *p.vars.get_mut(v).expect("sampled") += h,
                    Expr::Jet(j) => *p.jets.get_mut(j).expect("sampled") += h,
                    _ => unreachable!("partial derivative with respect to a coordinate"),
                }
                Evaluator::new(&real, &p, plan.guard).run(e).map(|r| r.value)
            };
            let sym = Evaluator::new(&real, &point, plan.guard).run(&de).map(|r| r.value);
            let (Ok(sym), Ok(plus), Ok(minus)) = (sym, shifted(FD_STEP), shifted(-FD_STEP)) else {
                continue;
            };
            let fd = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max((sym - fd).abs() / (1.0 + sym.abs()));
            break;
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Formal;

    #[test]
    fn identical_plans_are_deterministic() {
        let f = FunctionSymbol::new("f", &[Formal::X]);
        let e = f.apply_formal() * Expr::u() + Expr::konst("a");
        let plan = SamplePlan::default();
        let a = random_zero_test(&e, &plan);
        let b = random_zero_test(&e, &plan);
        assert_eq!(a, b);
        assert_eq!(a.verdict, NumericVerdict::Nonzero);
    }

    #[test]
    fn constructed_singularity_is_undecided() {
        let x = Expr::x();
        let raw = Expr::Pow(Arc::new(Expr::Add(Arc::from(vec![x.clone(), x.neg()]))), -1);
        let ev = random_zero_test(&raw, &SamplePlan::default());
        assert_eq!(ev.verdict, NumericVerdict::Undecided);
    }

    #[test]
    fn lambda_u_of_u_is_nonzero() {
        let ev = random_zero_test(&Expr::u().diff(&Expr::u()), &SamplePlan::default());
        assert_eq!(ev.verdict, NumericVerdict::Nonzero);
        assert_eq!(ev.witness.unwrap().value, 1.0);
    }

    #[test]
    fn finite_differences_agree() {
        let f = FunctionSymbol::new("f", &[Formal::X]);
        let e = f.apply_formal() * Expr::jet(0, 0, 1);
        let plan = SamplePlan::default();
        assert!(fd_crosscheck(&e, BaseVar::X, &plan) < 1e-6);
        assert_eq!(fd_crosscheck(&Expr::int(7), BaseVar::X, &plan), 0.0);
        let q = Expr::jet(0, 1, 0) * Expr::jet(0, 0, 1) / (Expr::u() * Expr::u());
        assert!(fd_crosscheck_partial(&q, &Expr::u(), &plan) < 1e-6);
    }
}
