//! Total derivatives, the Euler operator, prolongation of point vector fields
//! and the infinitesimal invariance test.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::expr::{substitute, BaseVar, Bindings, Expr, JetVar};

/// Highest jet order handled by the Euler operator and prolongation.
pub const MAX_ORDER: u32 = 2;

/// `D_v e = ∂e/∂v + Σ_J ∂e/∂u_J · u_{J+v}` over the jets present in `e`.
/// For `v` or `w` this is the plain partial derivative.
pub fn total_derivative(e: &Expr, v: BaseVar) -> Expr {
    let mut terms = vec![e.diff_var(v)];
    if v.jet_slot().is_some() {
        for j in e.jet_vars() {
            let de = e.diff_jet(j);
            if !de.is_zero() {
                terms.push(Expr::mul([de, Expr::Jet(j.bump(v).expect("t, x or y"))]));
            }
        }
    }
    Expr::add(terms)
}

/// Applies `D_t^a D_x^b D_y^c` for the multi-index `[a, b, c]`.
pub fn total_derivative_multi(e: &Expr, idx: [u8; 3]) -> Expr {
    let mut out = e.clone();
    for (slot, v) in BaseVar::TXY.into_iter().enumerate() {
        for _ in 0..idx[slot] {
            out = total_derivative(&out, v);
        }
    }
    out
}

/// All multi-indices of order at most `max`, in jet order.
pub fn multi_indices(max: u32) -> Vec<JetVar> {
    let mut out = Vec::new();
    for nt in 0..=max as u8 {
        for nx in 0..=max as u8 {
            for ny in 0..=max as u8 {
                let j = JetVar::new(nt, nx, ny);
                if j.order() <= max {
                    out.push(j);
                }
            }
        }
    }
    out.sort();
    out
}

fn check_order(e: &Expr) -> Result<()> {
    let found = e.max_jet_order();
    if found > MAX_ORDER {
        return Err(Error::OrderNotSupported { found, max: MAX_ORDER });
    }
    Ok(())
}

/// Variational derivative `E_U(e) = Σ_J (−D)^J ∂e/∂u_J` for `|J| ≤ 2`.
pub fn euler_operator(e: &Expr) -> Result<Expr> {
    check_order(e)?;
    let mut terms = Vec::new();
    for j in e.jet_vars() {
        let de = e.diff_jet(j);
        if de.is_zero() {
            continue;
        }
        let d = total_derivative_multi(&de, j.index());
        terms.push(if j.order() % 2 == 1 { d.neg() } else { d });
    }
    Ok(Expr::add(terms))
}

/// Point vector field `tau ∂t + xi ∂x + eta ∂y + phi ∂u`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub tau: Expr,
    pub xi: Expr,
    pub eta: Expr,
    pub phi: Expr,
}

impl VectorField {
    /// Builds a field, rejecting coefficients that contain derivative jets.
    pub fn new(tau: Expr, xi: Expr, eta: Expr, phi: Expr) -> Result<Self> {
        let v = VectorField { tau, xi, eta, phi };
        for c in v.coefficients() {
            if c.max_jet_order() > 0 {
                return Err(Error::Invalid(format!("point field coefficient depends on derivatives: {c}")));
            }
        }
        Ok(v)
    }

    pub fn zero() -> Self {
        VectorField {
            tau: Expr::zero(),
            xi: Expr::zero(),
            eta: Expr::zero(),
            phi: Expr::zero(),
        }
    }

    /// `(tau, xi, eta, phi)`.
    pub fn coefficients(&self) -> [&Expr; 4] {
        [&self.tau, &self.xi, &self.eta, &self.phi]
    }

    /// `(tau, xi, eta)`, the components along t, x, y.
    pub fn base_components(&self) -> [&Expr; 3] {
        [&self.tau, &self.xi, &self.eta]
    }

    pub fn map(&self, mut f: impl FnMut(&Expr) -> Expr) -> VectorField {
        VectorField {
            tau: f(&self.tau),
            xi: f(&self.xi),
            eta: f(&self.eta),
            phi: f(&self.phi),
        }
    }

    pub fn scale(&self, c: &Expr) -> VectorField {
        self.map(|e| Expr::mul([c.clone(), e.clone()]))
    }

    pub fn plus(&self, other: &VectorField) -> VectorField {
        VectorField {
            tau: Expr::add([self.tau.clone(), other.tau.clone()]),
            xi: Expr::add([self.xi.clone(), other.xi.clone()]),
            eta: Expr::add([self.eta.clone(), other.eta.clone()]),
            phi: Expr::add([self.phi.clone(), other.phi.clone()]),
        }
    }

    /// Action on an order-0 expression: `tau f_t + xi f_x + eta f_y + phi f_u`.
    pub fn apply_point(&self, f: &Expr) -> Expr {
        Expr::add([
            Expr::mul([self.tau.clone(), f.diff_var(BaseVar::T)]),
            Expr::mul([self.xi.clone(), f.diff_var(BaseVar::X)]),
            Expr::mul([self.eta.clone(), f.diff_var(BaseVar::Y)]),
            Expr::mul([self.phi.clone(), f.diff_jet(JetVar::U)]),
        ])
    }
}

/// A vector field lifted to jets of order at most `order`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProlongedField {
    pub base: VectorField,
    pub order: u32,
    /// `phi^J` for every multi-index of order at most `order`.
    pub coefficients: BTreeMap<JetVar, Expr>,
}

/// `phi^{J+i} = D_i phi^J − Σ_k u_{J+k} D_i ξ^k` with `(ξ¹, ξ², ξ³) = (tau, xi, eta)`.
pub fn prolong(v: &VectorField, order: u32) -> Result<ProlongedField> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::OrderNotSupported { found: order, max: MAX_ORDER });
    }
    let dxi: Vec<[Expr; 3]> = BaseVar::TXY
        .iter()
        .map(|&i| v.base_components().map(|c| total_derivative(c, i)))
        .collect();
    let mut coefficients = BTreeMap::new();
    coefficients.insert(JetVar::U, v.phi.clone());
    for k in multi_indices(order) {
        if k.order() == 0 {
            continue;
        }
        let idx = k.index();
        let slot = idx.iter().position(|&n| n > 0).expect("order ≥ 1");
        let mut parent = idx;
        parent[slot] -= 1;
        let parent = JetVar::new(parent[0], parent[1], parent[2]);
        let i = BaseVar::TXY[slot];
        let mut terms = vec![total_derivative(&coefficients[&parent], i)];
        for (kk, vk) in BaseVar::TXY.into_iter().enumerate() {
            let d = &dxi[slot][kk];
            if d.is_zero() {
                continue;
            }
            let jet = Expr::Jet(parent.bump(vk).expect("t, x or y"));
            terms.push(Expr::mul([Expr::int(-1), jet, d.clone()]));
        }
        coefficients.insert(k, Expr::add(terms));
    }
    Ok(ProlongedField { base: v.clone(), order, coefficients })
}

impl ProlongedField {
    pub fn coefficient(&self, j: JetVar) -> Option<&Expr> {
        self.coefficients.get(&j)
    }

    /// `X^(n) e` for an expression of jet order at most `n`.
    pub fn apply(&self, e: &Expr) -> Result<Expr> {
        let found = e.max_jet_order();
        if found > self.order {
            return Err(Error::OrderNotSupported { found, max: self.order });
        }
        let mut terms = Vec::new();
        for (c, v) in self.base.base_components().into_iter().zip(BaseVar::TXY) {
            if !c.is_zero() {
                terms.push(Expr::mul([c.clone(), e.diff_var(v)]));
            }
        }
        for j in e.jet_vars() {
            let de = e.diff_jet(j);
            if !de.is_zero() {
                terms.push(Expr::mul([self.coefficients[&j].clone(), de]));
            }
        }
        Ok(Expr::add(terms))
    }
}

/// The equation solved for `u_t`, used to restrict expressions to solutions.
#[derive(Clone, Debug)]
pub struct OnShell {
    pub rhs: Expr,
}

fn is_t_jet(j: &JetVar) -> bool {
    j.index()[0] > 0
}

impl OnShell {
    /// Solves `delta = a·u_t + b = 0` for `u_t`; `a` and `b` must be free of
    /// t-derivatives.
    pub fn from_equation(delta: &Expr) -> Result<Self> {
        let ut = Expr::jet(1, 0, 0);
        let a = delta.diff(&ut);
        if a.is_zero() {
            return Err(Error::CannotRestrictOnShell("u_t does not occur".into()));
        }
        let b = Expr::add([delta.clone(), Expr::mul([Expr::int(-1), a.clone(), ut.clone()])]);
        if a.jet_vars().iter().any(is_t_jet) || b.jet_vars().iter().any(is_t_jet) {
            return Err(Error::CannotRestrictOnShell(
                "u_t is not the sole highest t-derivative, or enters nonlinearly".into(),
            ));
        }
        let rhs = Expr::mul([Expr::int(-1), b, Expr::pow(a, -1)]);
        Ok(OnShell { rhs })
    }

    /// Replaces every jet with a t-derivative by the corresponding total
    /// derivative of the right-hand side, repeatedly.
    pub fn restrict(&self, e: &Expr) -> Expr {
        let mut cache: BTreeMap<JetVar, Expr> = BTreeMap::new();
        let mut out = e.clone();
        loop {
            let targets: Vec<JetVar> = out.jet_vars().into_iter().filter(is_t_jet).collect();
            if targets.is_empty() {
                return out;
            }
            let mut b = Bindings::new();
            for j in targets {
                let value = cache
                    .entry(j)
                    .or_insert_with(|| {
                        let [nt, nx, ny] = j.index();
                        total_derivative_multi(&self.rhs, [nt - 1, nx, ny])
                    })
                    .clone();
                b.insert(Expr::Jet(j), value);
            }
            out = substitute(&out, &b);
        }
    }
}

/// `X^(2) Δ` restricted to solutions of `Δ = 0`.
pub fn invariance_residual(v: &VectorField, delta: &Expr) -> Result<Expr> {
    check_order(delta)?;
    let shell = OnShell::from_equation(delta)?;
    let pr = prolong(v, MAX_ORDER)?;
    Ok(shell.restrict(&pr.apply(delta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Formal, FunctionSymbol};

    fn delta() -> Expr {
        let u = Expr::u();
        Expr::jet(1, 0, 0) - Expr::jet(0, 1, 1) / &u + Expr::jet(0, 1, 0) * Expr::jet(0, 0, 1) / (&u * &u)
    }

    #[test]
    fn total_derivative_of_u() {
        assert_eq!(total_derivative(&Expr::u(), BaseVar::X), Expr::jet(0, 1, 0));
    }

    #[test]
    fn total_derivative_product() {
        let f = FunctionSymbol::new("f", &[Formal::X]);
        let e = f.apply_formal() * Expr::jet(0, 0, 1);
        let expected = f.derivative(vec![1]) * Expr::jet(0, 0, 1) + f.apply_formal() * Expr::jet(0, 1, 1);
        assert_eq!(total_derivative(&e, BaseVar::X), expected);
    }

    #[test]
    fn euler_of_gradient_energy() {
        let ux = Expr::jet(0, 1, 0);
        let e = &ux * &ux / Expr::int(2);
        assert_eq!(euler_operator(&e).unwrap(), Expr::jet(0, 2, 0).neg());
    }

    #[test]
    fn euler_rejects_third_order() {
        let err = euler_operator(&Expr::jet(0, 3, 0)).unwrap_err();
        assert!(matches!(err, Error::OrderNotSupported { found: 3, .. }));
    }

    #[test]
    fn euler_annihilates_divergence() {
        let w = Expr::u() * Expr::jet(0, 0, 1) * Expr::x();
        let div = total_derivative(&w, BaseVar::X);
        assert!(euler_operator(&div).unwrap().is_zero());
    }

    #[test]
    fn translation_prolongs_to_zero() {
        let v = VectorField::new(Expr::one(), Expr::zero(), Expr::zero(), Expr::zero()).unwrap();
        let pr = prolong(&v, 2).unwrap();
        assert!(pr.coefficients.values().all(Expr::is_zero));
    }

    #[test]
    fn scaling_prolongation() {
        let v = VectorField::new(Expr::zero(), Expr::x(), Expr::zero(), Expr::u().neg()).unwrap();
        let pr = prolong(&v, 1).unwrap();
        assert_eq!(pr.coefficients[&JetVar::new(0, 1, 0)], -2 * Expr::jet(0, 1, 0));
    }

    #[test]
    fn invariance_of_basic_fields() {
        let (t, u) = (Expr::t(), Expr::u());
        let v2 = VectorField::new(Expr::one(), Expr::zero(), Expr::zero(), Expr::zero()).unwrap();
        let v1 = VectorField::new(t, Expr::zero(), Expr::zero(), u).unwrap();
        assert!(invariance_residual(&v2, &delta()).unwrap().is_zero());
        assert!(invariance_residual(&v1, &delta()).unwrap().is_zero());
    }

    #[test]
    fn stretch_without_compensation_is_not_a_symmetry() {
        let v = VectorField::new(Expr::zero(), Expr::x(), Expr::zero(), Expr::zero()).unwrap();
        assert!(!invariance_residual(&v, &delta()).unwrap().is_zero());
    }

    #[test]
    fn on_shell_requires_u_t() {
        let err = OnShell::from_equation(&Expr::jet(0, 2, 0)).unwrap_err();
        assert!(matches!(err, Error::CannotRestrictOnShell(_)));
    }
}
