//! Multiplier determining systems, multiplier checks, flux construction and
//! the divergence identity.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{substitute, substitute_function, BaseVar, Bindings, Expr, Formal, FunctionSymbol, Rational};
use crate::jet::{euler_operator, total_derivative, OnShell};
use crate::numeric::SamplePlan;
use crate::report::{serialize_expr, ResidualReport};

/// A multiplier `Λ(t, x, y, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier {
    pub lambda: Expr,
}

impl Multiplier {
    pub fn new(lambda: Expr) -> Result<Self> {
        if lambda.max_jet_order() > 0 {
            return Err(Error::Invalid(format!("multiplier depends on derivatives of u: {lambda}")));
        }
        Ok(Multiplier { lambda })
    }
}

/// Density and fluxes `(P¹, P², P³)` along `(t, x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConservedVector {
    pub p: [Expr; 3],
}

impl ConservedVector {
    pub fn new(p1: Expr, p2: Expr, p3: Expr) -> Result<Self> {
        let p = [p1, p2, p3];
        for c in &p {
            let found = c.max_jet_order();
            if found > 1 {
                return Err(Error::OrderNotSupported { found, max: 1 });
            }
        }
        Ok(ConservedVector { p })
    }

    pub fn is_trivial(&self) -> bool {
        self.p.iter().all(Expr::is_zero)
    }

    /// `D_t P¹ + D_x P² + D_y P³`.
    pub fn divergence(&self) -> Expr {
        Expr::add(self.p.iter().zip(BaseVar::TXY).map(|(c, v)| total_derivative(c, v)))
    }

    pub fn map(&self, mut f: impl FnMut(&Expr) -> Expr) -> ConservedVector {
        ConservedVector { p: [f(&self.p[0]), f(&self.p[1]), f(&self.p[2])] }
    }
}

/// One equation `coefficient = 0`, keyed by the jet monomial it multiplies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equation {
    #[serde(serialize_with = "serialize_expr")]
    pub monomial: Expr,
    #[serde(serialize_with = "serialize_expr")]
    pub coefficient: Expr,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct DeterminingSystem {
    pub equations: Vec<Equation>,
    pub provenance: Vec<String>,
}

impl DeterminingSystem {
    pub fn coefficients(&self) -> Vec<Expr> {
        self.equations.iter().map(|e| e.coefficient.clone()).collect()
    }

    pub fn get(&self, monomial: &Expr) -> Option<&Expr> {
        self.equations.iter().find(|e| &e.monomial == monomial).map(|e| &e.coefficient)
    }

    pub fn len(&self) -> usize {
        self.equations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equations.is_empty()
    }
}

/// Splits `e` into coefficients of distinct monomials in jets of order ≥ 1.
/// The coefficients keep any dependence on `u` itself.
pub fn separate_by_jet_monomials(e: &Expr) -> Result<BTreeMap<Expr, Expr>> {
    let is_derivative_jet = |f: &Expr| matches!(f, Expr::Jet(j) if j.order() > 0);
    let mut parts: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for term in e.terms() {
        let mut jets = Vec::new();
        let mut rest = Vec::new();
        for f in term.factors() {
            let jet_factor = match &f {
                Expr::Pow(b, k) => *k > 0 && is_derivative_jet(b),
                other => is_derivative_jet(other),
            };
            if jet_factor {
                jets.push(f);
            } else if f.max_jet_order() > 0 {
                return Err(Error::NonPolynomialJet(f.to_string()));
            } else {
                rest.push(f);
            }
        }
        parts.entry(Expr::mul(jets)).or_default().push(Expr::mul(rest));
    }
    Ok(parts
        .into_iter()
        .map(|(m, cs)| (m, Expr::add(cs)))
        .filter(|(_, c)| !c.is_zero())
        .collect())
}

/// Removes the common power of `u` (outside function arguments) and the
/// rational content, and makes the leading coefficient positive. Returns the
/// cleared expression and the stripped power of `u`.
pub fn clear_u_powers(e: &Expr) -> (Expr, i64) {
    let terms = e.terms();
    if terms.is_empty() {
        return (Expr::zero(), 0);
    }
    let u = Expr::u();
    let power = |t: &Expr| -> i64 {
        t.factors()
            .iter()
            .map(|f| match f {
                Expr::Jet(j) if j.order() == 0 => 1,
                Expr::Pow(b, k) if **b == u => *k,
                _ => 0,
            })
            .sum()
    };
    let min = terms.iter().map(power).min().unwrap_or(0);
    let mut g: Option<Rational> = None;
    for t in &terms {
        let (c, _) = t.split_coefficient();
        g = Some(match g {
            None => c.abs(),
            Some(g) => Rational::new(g.numer().gcd(c.numer()), g.denom().lcm(c.denom())),
        });
    }
    let mut g = g.unwrap_or_else(Rational::one);
    if g.is_zero() {
        g = Rational::one();
    }
    if terms[0].split_coefficient().0.is_negative() {
        g = -g;
    }
    let scale = Expr::mul([Expr::Num(Rational::one() / g), Expr::pow(u, -min)]);
    let cleared = Expr::add(terms.into_iter().map(|t| Expr::mul([scale.clone(), t])));
    (cleared, min)
}

fn lambda_symbol_check(sym: &FunctionSymbol) -> Result<()> {
    if sym.params.iter().any(|p| matches!(p, Formal::V | Formal::W)) {
        return Err(Error::Invalid(format!("multiplier '{}' may depend on t, x, y, u only", sym.name)));
    }
    Ok(())
}

/// `E_U(Λ·Δ)` separated by jet monomials, each coefficient cleared of powers
/// of `u`.
pub fn multiplier_determining_system(delta: &Expr, lambda: &Arc<FunctionSymbol>) -> Result<DeterminingSystem> {
    lambda_symbol_check(lambda)?;
    let expanded = euler_operator(&Expr::mul([lambda.apply_formal(), delta.clone()]))?;
    let mut sys = DeterminingSystem::default();
    sys.provenance.push(format!("E_U({}*({delta})) separated by monomials in derivatives of u", lambda.name));
    for (monomial, coefficient) in separate_by_jet_monomials(&expanded)? {
        let (cleared, power) = clear_u_powers(&coefficient);
        if power != 0 {
            sys.provenance.push(format!("coefficient of {monomial}: stripped factor u^{power}"));
        }
        sys.equations.push(Equation { monomial, coefficient: cleared });
    }
    Ok(sys)
}

fn dominates(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

/// Applications of `sym` (any derivative) occurring in `e`.
fn applications(e: &Expr, sym: &FunctionSymbol) -> BTreeSet<Expr> {
    let mut out = BTreeSet::new();
    e.walk(&mut |n| {
        if let Expr::Func(app) = n {
            if *app.sym == *sym {
                out.insert(n.clone());
            }
        }
    });
    out
}

/// A single derivative of `sym` times a nonzero rational, if `e` is one.
fn lone_derivative(e: &Expr, sym: &FunctionSymbol) -> Option<Vec<u32>> {
    let (_, rest) = e.split_coefficient();
    match rest {
        Expr::Func(app) if *app.sym == *sym => Some(app.deriv.clone()),
        _ => None,
    }
}

/// Simplifies a multiplier system by leading-derivative elimination: a lone
/// derivative equation `Λ_J = 0` annihilates every derivative of `Λ` that
/// contains `J`. Once `Λ_u = 0` is known, equations are split by powers of
/// `u`.
pub fn reduce_determining_system(sys: &DeterminingSystem, unknown: &Arc<FunctionSymbol>) -> DeterminingSystem {
    let mut known: Vec<Vec<u32>> = Vec::new();
    let mut eqs: Vec<Equation> = sys.equations.clone();
    let mut provenance = sys.provenance.clone();
    loop {
        let mut changed = false;
        let mut next = Vec::new();
        for eq in &eqs {
            if lone_derivative(&eq.coefficient, unknown).is_some_and(|d| known.contains(&d)) {
                next.push(eq.clone());
                continue;
            }
            let mut b = Bindings::new();
            for app in applications(&eq.coefficient, unknown) {
                if let Expr::Func(a) = &app {
                    if known.iter().any(|k| dominates(&a.deriv, k)) {
                        b.insert(app.clone(), Expr::zero());
                    }
                }
            }
            let c = clear_u_powers(&substitute(&eq.coefficient, &b)).0;
            if c.is_zero() {
                changed |= !b.is_empty();
                continue;
            }
            if let Some(d) = lone_derivative(&c, unknown) {
                if !known.contains(&d) {
                    known.push(d);
                    changed = true;
                }
            }
            next.push(Equation { monomial: eq.monomial.clone(), coefficient: c });
        }
        eqs = next;
        if !changed {
            break;
        }
    }
    // Drop lone derivatives implied by a lower one.
    eqs.retain(|eq| match lone_derivative(&eq.coefficient, unknown) {
        Some(d) => !known.iter().any(|k| *k != d && dominates(&d, k)),
        None => true,
    });
    let u_slot = unknown.slot_of(Formal::U);
    let u_free = match u_slot {
        None => true,
        Some(s) => known.iter().any(|k| k.iter().enumerate().all(|(i, &n)| n == (i == s) as u32)),
    };
    if u_free && u_slot.is_some() {
        provenance.push(format!("{}_u = 0: remaining equations split by powers of u", unknown.name));
        eqs = eqs.into_iter().flat_map(|eq| split_by_u_powers(&eq, unknown)).collect();
    }
    let mut seen = BTreeSet::new();
    eqs.retain(|e| seen.insert(e.coefficient.clone()));
    DeterminingSystem { equations: eqs, provenance }
}

fn split_by_u_powers(eq: &Equation, unknown: &Arc<FunctionSymbol>) -> Vec<Equation> {
    // Applications of the unknown are u-independent here; hide them while
    // collecting powers of u.
    let apps: Vec<Expr> = applications(&eq.coefficient, unknown).into_iter().collect();
    let hide: Bindings = apps
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), Expr::konst(&format!("hidden{i}"))))
        .collect();
    let reveal: Bindings = hide.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
    let hidden = substitute(&eq.coefficient, &hide);
    if hidden.any(&mut |n| matches!(n, Expr::Func(a) if a.args.contains(&Expr::u()))) {
        return vec![eq.clone()];
    }
    let u = Expr::u();
    let mut groups: BTreeMap<i64, Vec<Expr>> = BTreeMap::new();
    for t in hidden.terms() {
        let mut k = 0;
        let mut rest = Vec::new();
        for f in t.factors() {
            match &f {
                Expr::Jet(j) if j.order() == 0 => k += 1,
                Expr::Pow(b, n) if **b == u => k += n,
                _ => rest.push(f),
            }
        }
        groups.entry(k).or_default().push(Expr::mul(rest));
    }
    groups
        .into_iter()
        .rev()
        .map(|(k, cs)| Equation {
            monomial: Expr::mul([eq.monomial.clone(), Expr::pow(u.clone(), k)]),
            coefficient: clear_u_powers(&substitute(&Expr::add(cs), &reveal)).0,
        })
        .filter(|e| !e.coefficient.is_zero())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquationCheck {
    #[serde(serialize_with = "serialize_expr")]
    pub monomial: Expr,
    pub report: ResidualReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MultiplierCheck {
    pub equations: Vec<EquationCheck>,
    pub passed: bool,
    /// Monomial key of the first equation the candidate violates.
    pub first_failure: Option<String>,
}

/// Substitutes `candidate` for the unknown multiplier in every equation.
pub fn verify_multiplier(
    system: &DeterminingSystem,
    unknown: &Arc<FunctionSymbol>,
    candidate: &Expr,
    symbols: &crate::expr::SymbolTable,
    plan: &SamplePlan,
) -> Result<MultiplierCheck> {
    symbols.check_declared(candidate)?;
    Multiplier::new(candidate.clone())?;
    let mut equations = Vec::new();
    let mut first_failure = None;
    for eq in &system.equations {
        let residual = substitute_function(&eq.coefficient, unknown, candidate);
        let report = ResidualReport::evaluate(residual, plan);
        if !report.is_zero() && first_failure.is_none() {
            first_failure = Some(eq.monomial.to_string());
        }
        equations.push(EquationCheck { monomial: eq.monomial.clone(), report });
    }
    Ok(MultiplierCheck { passed: first_failure.is_none(), equations, first_failure })
}

/// `P = ((f + g) u, −g u_y / u, −f u_x / u)` for `f = f(x)`, `g = g(y)`.
pub fn construct_fluxes(f: &Expr, g: &Expr) -> Result<ConservedVector> {
    let only = |e: &Expr, v: BaseVar| {
        !e.any(&mut |n| matches!(n, Expr::Var(w) if *w != v) || matches!(n, Expr::Jet(_)))
    };
    if !only(f, BaseVar::X) || !only(g, BaseVar::Y) {
        return Err(Error::Invalid("flux construction needs f = f(x) and g = g(y)".into()));
    }
    let u = Expr::u();
    let inv_u = Expr::pow(u.clone(), -1);
    ConservedVector::new(
        Expr::mul([Expr::add([f.clone(), g.clone()]), u]),
        Expr::mul([Expr::int(-1), g.clone(), Expr::jet(0, 0, 1), inv_u.clone()]),
        Expr::mul([Expr::int(-1), f.clone(), Expr::jet(0, 1, 0), inv_u]),
    )
}

/// `Λ·Δ − (D_t P¹ + D_x P² + D_y P³)`, which must vanish off-shell.
pub fn divergence_residual(lambda: &Expr, delta: &Expr, p: &ConservedVector) -> Expr {
    Expr::add([Expr::mul([lambda.clone(), delta.clone()]), p.divergence().neg()])
}

pub fn verify_divergence_identity(lambda: &Expr, delta: &Expr, p: &ConservedVector, plan: &SamplePlan) -> ResidualReport {
    ResidualReport::evaluate(divergence_residual(lambda, delta, p), plan)
}

/// `D_i P^i` restricted to solutions of `delta = 0`.
pub fn on_shell_divergence(delta: &Expr, p: &ConservedVector) -> Result<Expr> {
    Ok(OnShell::from_equation(delta)?.restrict(&p.divergence()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::SymbolTable;
    use crate::report::symbolic_zero;

    fn delta() -> Expr {
        let u = Expr::u();
        Expr::jet(1, 0, 0) - Expr::jet(0, 1, 1) / &u + Expr::jet(0, 1, 0) * Expr::jet(0, 0, 1) / (&u * &u)
    }

    fn lam() -> Arc<FunctionSymbol> {
        FunctionSymbol::new("L", &[Formal::T, Formal::X, Formal::Y, Formal::U])
    }

    #[test]
    fn second_derivative_coefficient() {
        let sys = multiplier_determining_system(&delta(), &lam()).unwrap();
        let c = sys.get(&Expr::jet(0, 1, 1)).unwrap();
        assert_eq!(*c, lam().derivative_wrt(&[Formal::U]));
        assert!(sys.provenance.iter().any(|p| p.contains("u^-1")));
    }

    #[test]
    fn coefficients_are_jet_free() {
        let sys = multiplier_determining_system(&delta(), &lam()).unwrap();
        assert!(sys.equations.iter().all(|e| e.coefficient.max_jet_order() == 0));
    }

    #[test]
    fn reduced_system() {
        let l = lam();
        let sys = reduce_determining_system(&multiplier_determining_system(&delta(), &l).unwrap(), &l);
        let got: BTreeSet<Expr> = sys.coefficients().into_iter().collect();
        let want: BTreeSet<Expr> = [
            l.derivative_wrt(&[Formal::U]),
            l.derivative_wrt(&[Formal::T]),
            l.derivative_wrt(&[Formal::X, Formal::Y]),
        ]
        .into_iter()
        .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn transport_toy() {
        let l = lam();
        let sys = multiplier_determining_system(&Expr::jet(1, 0, 0), &l).unwrap();
        assert_eq!(sys.coefficients(), vec![l.derivative_wrt(&[Formal::T])]);
    }

    #[test]
    fn multiplier_candidates() {
        let symbols = SymbolTable::new().with_function("f", &[Formal::X]).with_function("g", &[Formal::Y]);
        let l = lam();
        let sys = multiplier_determining_system(&delta(), &l).unwrap();
        let plan = SamplePlan::default();
        let good = crate::parse("f(x) + g(y)", &symbols).unwrap();
        assert!(verify_multiplier(&sys, &l, &good, &symbols, &plan).unwrap().passed);
        let check = verify_multiplier(&sys, &l, &Expr::u(), &symbols, &plan).unwrap();
        assert_eq!(check.first_failure.as_deref(), Some("u_xy"));
        let check = verify_multiplier(&sys, &l, &(Expr::x() * Expr::y()), &symbols, &plan).unwrap();
        assert_eq!(check.first_failure.as_deref(), Some("1"));
        let undeclared = Expr::konst("k");
        assert!(verify_multiplier(&sys, &l, &undeclared, &symbols, &plan).is_err());
    }

    #[test]
    fn divergence_identity_and_on_shell() {
        let f = FunctionSymbol::new("f", &[Formal::X]).apply_formal();
        let g = FunctionSymbol::new("g", &[Formal::Y]).apply_formal();
        let p = construct_fluxes(&f, &g).unwrap();
        let plan = SamplePlan::default();
        assert!(verify_divergence_identity(&(&f + &g), &delta(), &p, &plan).is_zero());
        assert!(symbolic_zero(&on_shell_divergence(&delta(), &p).unwrap()));
        let flipped = ConservedVector { p: [p.p[0].clone(), -&p.p[1], p.p[2].clone()] };
        assert!(!verify_divergence_identity(&(&f + &g), &delta(), &flipped, &plan).is_zero());
    }

    #[test]
    fn constant_instances() {
        let p = construct_fluxes(&Expr::one(), &Expr::zero()).unwrap();
        assert_eq!(p.p[0], Expr::u());
        assert!(p.p[1].is_zero());
        assert_eq!(p.p[2], (Expr::jet(0, 1, 0) / Expr::u()).neg());
        assert!(construct_fluxes(&Expr::zero(), &Expr::zero()).unwrap().is_trivial());
        let zero = ConservedVector::new(Expr::zero(), Expr::zero(), Expr::zero()).unwrap();
        assert!(verify_divergence_identity(&Expr::zero(), &delta(), &zero, &SamplePlan::default()).is_zero());
    }
}
