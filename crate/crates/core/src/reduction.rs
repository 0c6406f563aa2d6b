//! Invariant checks, similarity reduction under an ansatz, comparison of
//! reduced equations up to a nonzero factor, and verification of candidate
//! solutions.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{content_strip, substitute, to_fraction, BaseVar, Bindings, Expr, FuncApp, FunctionSymbol, Formal};
use crate::jet::VectorField;
use crate::numeric::eval::{Evaluated, Evaluator};
use crate::numeric::{eval_point, random_zero_test, SamplePlan};
use crate::report::{symbolic_zero, ResidualReport, Verdict};

/// `u = u_form(t, x, y, H(v, w))` with invariants `v`, `w` in (t, x, y).
#[derive(Clone, Debug, PartialEq)]
pub struct Ansatz {
    pub v: Expr,
    pub w: Expr,
    /// Written with `H` applied to the formal variables `v`, `w`.
    pub u_form: Expr,
    pub h: Arc<FunctionSymbol>,
}

impl Ansatz {
    pub fn new(v: Expr, w: Expr, u_form: Expr) -> Result<Self> {
        for (name, e) in [("v", &v), ("w", &w)] {
            if !e.jet_vars().is_empty() {
                return Err(Error::InvalidAnsatz(format!("{name} depends on u: {e}")));
            }
            if e.contains_var(BaseVar::V) || e.contains_var(BaseVar::W) {
                return Err(Error::InvalidAnsatz(format!("{name} refers to the reduced variables: {e}")));
            }
        }
        let reduced: Vec<Arc<FunctionSymbol>> = u_form
            .function_symbols()
            .into_iter()
            .filter(|s| s.params == [Formal::V, Formal::W])
            .collect();
        let [h] = reduced.as_slice() else {
            return Err(Error::InvalidAnsatz("u_form must contain exactly one function of (v, w)".into()));
        };
        let h = h.clone();
        let mut bad = false;
        u_form.walk(&mut |n| {
            if let Expr::Func(app) = n {
                if app.sym == h {
                    bad |= !app.is_underived() || app.args != [Expr::Var(BaseVar::V), Expr::Var(BaseVar::W)];
                }
            }
        });
        if bad {
            return Err(Error::InvalidAnsatz(format!("u_form must use {} only as {}(v, w)", h.name, h.name)));
        }
        if !u_form.jet_vars().is_empty() {
            return Err(Error::InvalidAnsatz(format!("u_form depends on u: {u_form}")));
        }
        Ok(Ansatz { v, w, u_form, h })
    }

    /// `u` as an expression in (t, x, y).
    pub fn lifted(&self) -> Expr {
        let mut b = Bindings::new();
        b.insert(Expr::Var(BaseVar::V), self.v.clone());
        b.insert(Expr::Var(BaseVar::W), self.w.clone());
        substitute(&self.u_form, &b)
    }
}

/// Reduced equation in `H(v, w)`, its derivatives, `v`, `w` and constants.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedEquation {
    pub expr: Expr,
    pub h: Arc<FunctionSymbol>,
}

impl ReducedEquation {
    /// Validates that `expr` is free of t, x, y and of jets.
    pub fn new(expr: Expr, h: Arc<FunctionSymbol>) -> Result<Self> {
        if let Some(bad) = point_dependent_factor(&expr) {
            return Err(Error::AnsatzDoesNotReduce { term: bad.to_string() });
        }
        Ok(ReducedEquation { expr, h })
    }

    /// Coefficients over monomials in `H` and its derivatives.
    pub fn monomials(&self) -> Result<BTreeMap<Expr, Expr>> {
        split_by_h(&self.expr, &self.h)
    }
}

fn point_dependent_factor(e: &Expr) -> Option<Expr> {
    for term in e.terms() {
        for f in term.factors() {
            if f.any(&mut |n| matches!(n, Expr::Var(BaseVar::T | BaseVar::X | BaseVar::Y) | Expr::Jet(_))) {
                return Some(f);
            }
        }
    }
    None
}

/// `tau ∂_t inv + xi ∂_x inv + eta ∂_y inv + phi ∂_u inv`.
pub fn verify_invariant(v: &VectorField, inv: &Expr, plan: &SamplePlan) -> Result<ResidualReport> {
    if inv.max_jet_order() > 0 {
        return Err(Error::Invalid(format!("invariant depends on derivatives: {inv}")));
    }
    Ok(ResidualReport::evaluate(v.apply_point(inv), plan))
}

fn is_h_factor(f: &Expr, h: &FunctionSymbol) -> bool {
    let base = match f {
        Expr::Pow(b, _) => &**b,
        other => other,
    };
    matches!(base, Expr::Func(app) if *app.sym == *h)
}

fn split_by_h(e: &Expr, h: &FunctionSymbol) -> Result<BTreeMap<Expr, Expr>> {
    let mut parts: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for term in e.terms() {
        let mut mono = Vec::new();
        let mut rest = Vec::new();
        for f in term.factors() {
            if is_h_factor(&f, h) {
                mono.push(f);
            } else if f.contains_function(&h.name) {
                return Err(Error::AnsatzDoesNotReduce { term: f.to_string() });
            } else {
                rest.push(f);
            }
        }
        parts.entry(Expr::mul(mono)).or_default().push(Expr::mul(rest));
    }
    Ok(parts
        .into_iter()
        .map(|(m, cs)| (m, Expr::add(cs)))
        .filter(|(_, c)| !c.is_zero())
        .collect())
}

/// Rebuilds `e`, replacing function applications for which `f` returns a value.
fn map_funcs(e: &Expr, f: &impl Fn(&FuncApp) -> Option<Expr>) -> Expr {
    match e {
        Expr::Num(_) | Expr::Const(_) | Expr::Var(_) | Expr::Jet(_) => e.clone(),
        Expr::Func(app) => f(app).unwrap_or_else(|| {
            Expr::func(FuncApp {
                sym: app.sym.clone(),
                args: app.args.iter().map(|a| map_funcs(a, f)).collect(),
                deriv: app.deriv.clone(),
            })
        }),
        Expr::Exp(a) => Expr::exp(map_funcs(a, f)),
        Expr::Log(a) => Expr::log(map_funcs(a, f)),
        Expr::Sin(a) => Expr::sin(map_funcs(a, f)),
        Expr::Cos(a) => Expr::cos(map_funcs(a, f)),
        Expr::Add(ts) => Expr::add(ts.iter().map(|t| map_funcs(t, f))),
        Expr::Mul(fs) => Expr::mul(fs.iter().map(|t| map_funcs(t, f))),
        Expr::Pow(b, k) => Expr::pow(map_funcs(b, f), *k),
        Expr::RPow(b, x) => Expr::rpow(map_funcs(b, f), map_funcs(x, f)),
    }
}

/// Replaces every jet of `delta` by the matching partial derivative of `u`.
pub fn substitute_solution(delta: &Expr, u: &Expr) -> Expr {
    let mut b = Bindings::new();
    for j in delta.jet_vars() {
        let mut d = u.clone();
        for (v, &n) in BaseVar::TXY.iter().zip(&j.index()) {
            for _ in 0..n {
                d = d.diff_var(*v);
            }
        }
        b.insert(Expr::Jet(j), d);
    }
    substitute(delta, &b)
}

/// Solves `inv = target` for `var` when `inv` is affine in `var`.
fn solve_affine(inv: &Expr, var: BaseVar, target: &Expr) -> Option<Expr> {
    let a = inv.diff_var(var);
    if symbolic_zero(&a) || !symbolic_zero(&a.diff_var(var)) {
        return None;
    }
    let rest = Expr::add([inv.clone(), Expr::mul([a.clone(), Expr::var(var)]).neg()]);
    Some(Expr::mul([Expr::add([target.clone(), rest.neg()]), Expr::pow(a, -1)]))
}

/// Elimination order: spatial variables first, t last.
const ELIMINATION_ORDER: [BaseVar; 3] = [BaseVar::X, BaseVar::Y, BaseVar::T];

/// Back-substitution plans `(a, a(V, W, c), b, b(V, W, c), c)` eliminating two
/// base variables through the invariants.
fn elimination_plans(a: &Ansatz) -> Vec<(BaseVar, Expr, BaseVar, Expr, BaseVar)> {
    let vv = Expr::Var(BaseVar::V);
    let ww = Expr::Var(BaseVar::W);
    let mut plans = Vec::new();
    for (first, first_target, second, second_target) in [(&a.v, &vv, &a.w, &ww), (&a.w, &ww, &a.v, &vv)] {
        for p in ELIMINATION_ORDER {
            let Some(p_expr) = solve_affine(first, p, first_target) else { continue };
            let second_sub = second.subs(&Expr::var(p), &p_expr);
            for q in ELIMINATION_ORDER {
                if q == p {
                    continue;
                }
                let Some(q_expr) = solve_affine(&second_sub, q, second_target) else { continue };
                let p_final = p_expr.subs(&Expr::var(q), &q_expr);
                let c = BaseVar::TXY.into_iter().find(|&c| c != p && c != q).expect("third variable");
                plans.push((p, p_final, q, q_expr, c));
            }
        }
    }
    plans
}

/// Numeric check that `(v, w)` has Jacobian rank 2 in (t, x, y) somewhere.
fn invariants_independent(a: &Ansatz, plan: &SamplePlan) -> bool {
    let grads: Vec<Expr> = [&a.v, &a.w]
        .iter()
        .flat_map(|e| BaseVar::TXY.map(|x| e.diff_var(x)))
        .collect();
    let refs: Vec<&Expr> = grads.iter().chain([&a.v, &a.w]).collect();
    for trial in 0..plan.trials {
        for attempt in 0..plan.attempts.max(1) {
            let real = plan.realize(&refs, trial, attempt);
            let point = plan.point(&refs, trial, attempt);
            let vals: Option<Vec<f64>> = grads.iter().map(|g| eval_point(g, &real, &point, plan.guard).ok()).collect();
            let Some(j) = vals else { continue };
            let minors = [j[0] * j[4] - j[1] * j[3], j[0] * j[5] - j[2] * j[3], j[1] * j[5] - j[2] * j[4]];
            let scale = j.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
            if minors.iter().any(|m| m.abs() > 1e-9 * scale * scale) {
                return true;
            }
            break;
        }
    }
    false
}

/// Divides out common factors and combines over a common denominator.
fn normalize_reduced(e: &Expr) -> Expr {
    let num = to_fraction(e).num;
    content_strip(&num).0
}

/// Chain-rule substitution of the ansatz into `delta`, followed by exact
/// elimination of t, x, y through the invariants.
pub fn reduce_by_ansatz(delta: &Expr, a: &Ansatz, plan: &SamplePlan) -> Result<ReducedEquation> {
    if !invariants_independent(a, plan) {
        return Err(Error::DependentInvariants);
    }
    let substituted = substitute_solution(delta, &a.lifted());
    let (v, w, h) = (a.v.clone(), a.w.clone(), a.h.clone());
    let formal = vec![Expr::Var(BaseVar::V), Expr::Var(BaseVar::W)];
    let collapsed = map_funcs(&substituted, &|app| {
        (app.sym == h && app.args == [v.clone(), w.clone()]).then(|| {
            Expr::func(FuncApp { sym: app.sym.clone(), args: formal.clone(), deriv: app.deriv.clone() })
        })
    });
    let parts = split_by_h(&to_fraction(&collapsed).num, &a.h)?;
    let Some((_, ref_coef)) = parts.iter().next() else {
        return ReducedEquation::new(Expr::zero(), a.h.clone());
    };
    let mut first_failure = None;
    for (p, p_expr, q, q_expr, c) in elimination_plans(a) {
        let mut b = Bindings::new();
        b.insert(Expr::var(p), p_expr);
        b.insert(Expr::var(q), q_expr);
        let eliminated: Vec<(Expr, Expr)> = parts.iter().map(|(m, k)| (m.clone(), substitute(k, &b))).collect();
        let reference = substitute(ref_coef, &b);
        let offending = eliminated.iter().find(|(_, k)| {
            let ratio = Expr::mul([k.clone(), Expr::pow(reference.clone(), -1)]);
            !symbolic_zero(&ratio.diff_var(c))
        });
        if let Some((m, k)) = offending {
            first_failure.get_or_insert_with(|| format!("{k} multiplying {m}"));
            continue;
        }
        let cv = Expr::var(c);
        let Some(c0) = [Expr::zero(), Expr::one(), Expr::int(2)]
            .into_iter()
            .find(|c0| !symbolic_zero(&reference.subs(&cv, c0)))
        else {
            continue;
        };
        let ref0 = Expr::pow(reference.subs(&cv, &c0), -1);
        let expr = Expr::add(
            eliminated
                .iter()
                .map(|(m, k)| Expr::mul([k.subs(&cv, &c0), ref0.clone(), m.clone()])),
        );
        return ReducedEquation::new(normalize_reduced(&expr), a.h.clone());
    }
    Err(Error::AnsatzDoesNotReduce {
        term: first_failure.unwrap_or_else(|| format!("no invariant is affine in t, x or y: v = {}, w = {}", a.v, a.w)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    Equivalent,
    NotEquivalent,
}

/// Monomial coefficients after removing the common power of each `H` factor.
fn normalized_monomials(e: &ReducedEquation) -> Result<BTreeMap<Expr, Expr>> {
    let stripped = normalize_reduced(&e.expr);
    split_by_h(&stripped, &e.h)
}

/// Pairs of coefficient vectors over the union of `H`-monomials.
fn aligned(e1: &ReducedEquation, e2: &ReducedEquation) -> Result<Vec<(Expr, Expr)>> {
    if e1.h.name != e2.h.name {
        return Err(Error::Invalid(format!("reduced equations use different unknowns {} and {}", e1.h.name, e2.h.name)));
    }
    let m1 = normalized_monomials(e1)?;
    let m2 = normalized_monomials(e2)?;
    let mut keys: Vec<&Expr> = m1.keys().chain(m2.keys()).collect();
    keys.sort();
    keys.dedup();
    Ok(keys
        .into_iter()
        .map(|k| (m1.get(k).cloned().unwrap_or_else(Expr::zero), m2.get(k).cloned().unwrap_or_else(Expr::zero)))
        .collect())
}

/// Equivalent iff the coefficient vectors are proportional:
/// every `c_i d_j − c_j d_i` vanishes.
pub fn equivalent_up_to_factor(e1: &ReducedEquation, e2: &ReducedEquation) -> Result<Equivalence> {
    let pairs = aligned(e1, e2)?;
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let cross = Expr::add([
                Expr::mul([pairs[i].0.clone(), pairs[j].1.clone()]),
                Expr::mul([pairs[j].0.clone(), pairs[i].1.clone()]).neg(),
            ]);
            if !symbolic_zero(&cross) {
                return Ok(Equivalence::NotEquivalent);
            }
        }
    }
    let nonzero = |f: fn(&(Expr, Expr)) -> &Expr| pairs.iter().any(|p| !f(p).is_zero());
    if nonzero(|p| &p.0) != nonzero(|p| &p.1) {
        return Ok(Equivalence::NotEquivalent);
    }
    Ok(Equivalence::Equivalent)
}

/// Largest normalized cross product `|c_i d_j − c_j d_i| / (max|c| max|d|)`
/// over `points` random evaluations of the coefficient vectors. Magnitudes
/// include intermediate values, so cancellation does not inflate the ratio.
pub fn numeric_agreement(e1: &ReducedEquation, e2: &ReducedEquation, plan: &SamplePlan, points: usize) -> Result<f64> {
    let pairs = aligned(e1, e2)?;
    let refs: Vec<&Expr> = pairs.iter().flat_map(|(a, b)| [a, b]).collect();
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    for trial in 0..points {
        for attempt in 0..plan.attempts.max(1) {
            let real = plan.realize(&refs, trial, attempt);
            let point = plan.point(&refs, trial, attempt);
            let eval = |e: &Expr| Evaluator::new(&real, &point, plan.guard).run(e).ok();
            let vals: Option<Vec<(Evaluated, Evaluated)>> = pairs.iter().map(|(a, b)| Some((eval(a)?, eval(b)?))).collect();
            let Some(evals) = vals else { continue };
            let magnitude = |v: &Evaluated| v.value.abs().max(v.scale);
            let nc = evals.iter().fold(0.0f64, |m, v| m.max(magnitude(&v.0)));
            let nd = evals.iter().fold(0.0f64, |m, v| m.max(magnitude(&v.1)));
            let vals: Vec<(f64, f64)> = evals.iter().map(|(a, b)| (a.value, b.value)).collect();
            if nc == 0.0 || nd == 0.0 {
                worst = worst.max(if nc == nd { 0.0 } else { 1.0 });
            } else {
                for i in 0..vals.len() {
                    for j in i + 1..vals.len() {
                        let cross = (vals[i].0 * vals[j].1 - vals[j].0 * vals[i].1).abs() / (nc * nd);
                        worst = worst.max(cross);
                    }
                }
            }
            accepted += 1;
            break;
        }
    }
    if accepted == 0 {
        return Err(Error::Invalid("no sample point avoided the singularity guards".into()));
    }
    Ok(worst)
}

fn is_point_free(e: &Expr) -> bool {
    !e.any(&mut |n| matches!(n, Expr::Var(_) | Expr::Jet(_) | Expr::Func(_)))
}

/// Moves the monomial content of every power of a sum outside the power.
fn pull_sum_content(e: &Expr) -> Expr {
    match e {
        Expr::Pow(b, k) if matches!(**b, Expr::Add(_)) => {
            let (primitive, content) = content_strip(b);
            Expr::mul([Expr::pow(content, *k), Expr::pow(primitive, *k)])
        }
        Expr::Add(ts) => Expr::add(ts.iter().map(pull_sum_content)),
        Expr::Mul(fs) => Expr::mul(fs.iter().map(pull_sum_content)),
        other => other.clone(),
    }
}

/// Factors of `e`'s numerator that involve only symbolic constants.
fn constant_factors(e: &Expr) -> Vec<Expr> {
    let num = to_fraction(e).num;
    let (primitive, content) = content_strip(&num);
    let mut out = Vec::new();
    for f in content.factors().into_iter().chain([primitive]) {
        let base = match &f {
            Expr::Pow(b, k) if *k > 0 => (**b).clone(),
            Expr::Pow(..) => continue,
            other => other.clone(),
        };
        if base.as_rational().is_none() && is_point_free(&base) && !out.contains(&base) {
            out.push(base);
        }
    }
    out
}

/// `log e` up to an additive constant, split over products and powers.
fn log_expand(e: &Expr) -> Expr {
    if is_point_free(e) {
        return Expr::zero();
    }
    match e {
        Expr::Mul(fs) => Expr::add(fs.iter().map(log_expand)),
        Expr::Pow(b, k) => Expr::mul([Expr::int(*k), log_expand(b)]),
        Expr::RPow(b, x) if is_point_free(x) => Expr::mul([(**x).clone(), log_expand(b)]),
        Expr::Exp(a) => (**a).clone(),
        Expr::Add(_) => {
            let f = to_fraction(e);
            let (primitive, content) = content_strip(&f.num);
            if f.den.is_empty() && content.as_rational().is_some() {
                return Expr::log(e.clone());
            }
            let mut parts = vec![log_expand(&content), log_expand_primitive(&primitive)];
            for (b, k) in &f.den {
                parts.push(Expr::mul([Expr::int(-(*k as i64)), log_expand(b)]));
            }
            Expr::add(parts)
        }
        other => Expr::log(other.clone()),
    }
}

fn log_expand_primitive(e: &Expr) -> Expr {
    match e {
        Expr::Add(_) if !is_point_free(e) => Expr::log(e.clone()),
        other => log_expand(other),
    }
}

/// Replaces each jet `u_J` of `delta` by `u · P_J`, where `P_J` is built from
/// the derivatives of `log sol`. The result is rational in `u` and free of
/// the solution's non-integer powers.
fn logarithmic_residual(delta: &Expr, sol: &Expr) -> Expr {
    let log = log_expand(sol);
    let mut memo: BTreeMap<[u8; 3], Expr> = BTreeMap::new();
    memo.insert([0, 0, 0], Expr::one());
    fn p_of(idx: [u8; 3], log: &Expr, memo: &mut BTreeMap<[u8; 3], Expr>) -> Expr {
        if let Some(p) = memo.get(&idx) {
            return p.clone();
        }
        let slot = idx.iter().position(|&n| n > 0).expect("nonzero index");
        let mut parent = idx;
        parent[slot] -= 1;
        let prev = p_of(parent, log, memo);
        let var = BaseVar::TXY[slot];
        let p = Expr::add([Expr::mul([log.diff_var(var), prev.clone()]), prev.diff_var(var)]);
        memo.insert(idx, p.clone());
        p
    }
    let mut b = Bindings::new();
    for j in delta.jet_vars() {
        if j.order() > 0 {
            b.insert(Expr::Jet(j), Expr::mul([Expr::u(), p_of(j.index(), &log, &mut memo)]));
        }
    }
    substitute(delta, &b)
}

/// Simplifies a residual divided by `u` when it depends on t alone.
fn relative_in_t(residual: &Expr) -> Option<Expr> {
    let rel = Expr::mul([residual.clone(), Expr::pow(Expr::u(), -1)]);
    if !rel.jet_vars().is_empty() || rel.any(&mut |n| matches!(n, Expr::Func(_) | Expr::Var(BaseVar::V | BaseVar::W))) {
        return None;
    }
    let spatial = [BaseVar::X, BaseVar::Y];
    if spatial.iter().any(|&v| !symbolic_zero(&rel.diff_var(v))) {
        return None;
    }
    let mut b = Bindings::new();
    for v in spatial {
        b.insert(Expr::var(v), Expr::zero());
    }
    let at_origin = substitute(&rel, &b);
    let simplified = pull_sum_content(&at_origin);
    let check = Expr::add([simplified.clone(), rel.neg()]);
    symbolic_zero(&check).then_some(simplified)
}

/// Substitutes `sol` for `u` in `delta`. Products of powers are handled
/// through logarithmic derivatives. A nonzero residual is scanned for
/// constant factors, reported as constraints.
pub fn verify_solution(delta: &Expr, sol: &Expr, plan: &SamplePlan) -> Result<ResidualReport> {
    if !sol.jet_vars().is_empty() {
        return Err(Error::Invalid(format!("solution must be written in t, x, y: {sol}")));
    }
    let direct = substitute_solution(delta, sol);
    let numeric = random_zero_test(&direct, plan);
    if symbolic_zero(&direct) {
        return Ok(ResidualReport::from_parts(direct, true, numeric));
    }
    let logarithmic = logarithmic_residual(delta, sol);
    if symbolic_zero(&logarithmic) {
        return Ok(ResidualReport::from_parts(logarithmic, true, numeric));
    }
    let shown = relative_in_t(&logarithmic).map(|a| Expr::mul([a, Expr::u()])).unwrap_or(logarithmic);
    let mut report = ResidualReport::from_parts(shown.clone(), false, numeric);
    if report.verdict != Verdict::Nonzero {
        return Ok(report);
    }
    let relative = Expr::mul([shown, Expr::pow(Expr::u(), -1)]);
    let constraints: Vec<Expr> = constant_factors(&relative)
        .into_iter()
        .filter(|c| match c {
            Expr::Const(_) => symbolic_zero(&direct.subs(c, &Expr::zero())),
            _ => true,
        })
        .collect();
    if !constraints.is_empty() {
        report.verdict = Verdict::Constrained;
        report.note = Some(format!(
            "residual vanishes iff {}",
            constraints.iter().map(|c| format!("{c} = 0")).collect::<Vec<_>>().join(" or ")
        ));
        report.constraints = constraints;
    }
    Ok(report)
}
