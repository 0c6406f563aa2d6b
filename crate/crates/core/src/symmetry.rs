//! The relation between point symmetries and conserved vectors, the
//! determining system it generates, and decomposition over a finite basis of
//! point fields.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::conservation::{clear_u_powers, separate_by_jet_monomials, ConservedVector, DeterminingSystem, Equation};
use crate::error::{Error, Result};
use crate::expr::{BaseVar, Expr, FunctionSymbol, JetVar, Rational};
use crate::jet::{prolong, total_derivative, VectorField};
use crate::numeric::SamplePlan;
use crate::report::{serialize_exprs, symbolic_zero, ResidualReport};

/// One residual per component of the symmetry/conserved-vector relation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymmetryLinkResidual {
    #[serde(serialize_with = "serialize_exprs")]
    pub r: [Expr; 3],
}

impl SymmetryLinkResidual {
    pub fn is_zero(&self) -> bool {
        self.r.iter().all(symbolic_zero)
    }

    pub fn reports(&self, plan: &SamplePlan) -> Vec<ResidualReport> {
        self.r.iter().map(|e| ResidualReport::evaluate(e.clone(), plan)).collect()
    }
}

/// `r_i = X⁽¹⁾(Pⁱ) + Pⁱ Σ_k D_k ξᵏ − Σ_k Pᵏ D_k ξⁱ` with `(ξ¹, ξ², ξ³) = (tau, xi, eta)`.
pub fn conslaw_symmetry_residual(v: &VectorField, p: &ConservedVector) -> Result<SymmetryLinkResidual> {
    let found = p.p.iter().map(Expr::max_jet_order).max().unwrap_or(0);
    if found > 1 {
        return Err(Error::OrderNotSupported { found, max: 1 });
    }
    let pr = prolong(v, 1)?;
    let xis = v.base_components();
    let dxi: Vec<Vec<Expr>> = xis
        .iter()
        .map(|xi| BaseVar::TXY.iter().map(|&k| total_derivative(xi, k)).collect())
        .collect();
    let div_xi = Expr::add((0..3).map(|k| dxi[k][k].clone()));
    let mut r = Vec::with_capacity(3);
    for i in 0..3 {
        let mut terms = vec![pr.apply(&p.p[i])?, Expr::mul([p.p[i].clone(), div_xi.clone()])];
        for k in 0..3 {
            terms.push(Expr::mul([Expr::int(-1), p.p[k].clone(), dxi[i][k].clone()]));
        }
        r.push(Expr::add(terms));
    }
    let r: [Expr; 3] = r.try_into().expect("three components");
    Ok(SymmetryLinkResidual { r })
}

/// Expands the relation for a field with opaque coefficients and separates
/// each component by monomials in derivative jets.
pub fn generate_link_determining_system(p: &ConservedVector, v: &VectorField) -> Result<DeterminingSystem> {
    let res = conslaw_symmetry_residual(v, p)?;
    let mut sys = DeterminingSystem::default();
    for (i, r) in res.r.iter().enumerate() {
        for (monomial, coefficient) in separate_by_jet_monomials(r)? {
            let (cleared, power) = clear_u_powers(&coefficient);
            if cleared.is_zero() || sys.equations.iter().any(|e| e.coefficient == cleared) {
                continue;
            }
            let mut note = format!("r{}: coefficient of {monomial}", i + 1);
            if power != 0 {
                note.push_str(&format!(", divided by u^{power}"));
            }
            sys.provenance.push(note);
            sys.equations.push(Equation { monomial, coefficient: cleared });
        }
    }
    Ok(sys)
}

/// The symbol used for an opaque coefficient of a point field in (t, x, y, u).
pub fn opaque_field(names: [&str; 4]) -> VectorField {
    use crate::expr::Formal;
    let args = [Formal::T, Formal::X, Formal::Y, Formal::U];
    let f = |n: &str| FunctionSymbol::new(n, &args).apply_formal();
    VectorField { tau: f(names[0]), xi: f(names[1]), eta: f(names[2]), phi: f(names[3]) }
}

/// `V1 = t∂t + u∂u`, `V2 = ∂t`, `V3 = ∂x`, `V4 = ∂y`, `V5 = x∂x − u∂u`, `V6 = y∂y − u∂u`.
pub fn ricci_basis() -> Vec<VectorField> {
    let (t, x, y, u) = (Expr::t(), Expr::x(), Expr::y(), Expr::u());
    let z = Expr::zero;
    let one = Expr::one;
    vec![
        VectorField { tau: t, xi: z(), eta: z(), phi: u.clone() },
        VectorField { tau: one(), xi: z(), eta: z(), phi: z() },
        VectorField { tau: z(), xi: one(), eta: z(), phi: z() },
        VectorField { tau: z(), xi: z(), eta: one(), phi: z() },
        VectorField { tau: z(), xi: x, eta: z(), phi: u.clone().neg() },
        VectorField { tau: z(), xi: z(), eta: y, phi: u.neg() },
    ]
}

/// `(c1 t + c2)∂t + ξ(x)∂x + η(y)∂y + u(c1 − ξ' − η')∂u`.
pub fn general_ricci_field(c1: &Expr, c2: &Expr, xi: &Expr, eta: &Expr) -> VectorField {
    let u = Expr::u();
    VectorField {
        tau: Expr::add([Expr::mul([c1.clone(), Expr::t()]), c2.clone()]),
        xi: xi.clone(),
        eta: eta.clone(),
        phi: Expr::mul([
            u,
            Expr::add([c1.clone(), xi.diff_var(BaseVar::X).neg(), eta.diff_var(BaseVar::Y).neg()]),
        ]),
    }
}

/// Coefficients `c_k` with `v = Σ c_k B_k` over a basis `B`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasisDecomposition {
    #[serde(serialize_with = "serialize_exprs")]
    pub coefficients: Vec<Expr>,
}

impl BasisDecomposition {
    pub fn reconstruct(&self, basis: &[VectorField]) -> VectorField {
        basis
            .iter()
            .zip(&self.coefficients)
            .fold(VectorField::zero(), |acc, (b, c)| acc.plus(&b.scale(c)))
    }
}

const COMPONENTS: [&str; 4] = ["tau", "xi", "eta", "phi"];

fn is_poly_atom(e: &Expr) -> bool {
    matches!(e, Expr::Var(BaseVar::T | BaseVar::X | BaseVar::Y)) || *e == Expr::Jet(JetVar::U)
}

fn depends_on_point(e: &Expr) -> bool {
    e.any(&mut |n| is_poly_atom(n) || matches!(n, Expr::Jet(_)))
}

/// Coefficients of `e` as a polynomial in t, x, y, u over the remaining symbols.
fn point_polynomial(e: &Expr) -> Result<BTreeMap<Expr, Expr>> {
    let mut parts: BTreeMap<Expr, Vec<Expr>> = BTreeMap::new();
    for term in e.terms() {
        let mut mono = Vec::new();
        let mut rest = Vec::new();
        for f in term.factors() {
            let atom = match &f {
                Expr::Pow(b, k) => *k > 0 && is_poly_atom(b),
                other => is_poly_atom(other),
            };
            if atom {
                mono.push(f);
            } else if depends_on_point(&f) {
                return Err(Error::NotInSpan { monomial: f.to_string() });
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

/// Exact coefficient matching over monomials in t, x, y, u. Basis entries must
/// be rational; the field's coefficients may carry symbolic constants.
pub fn decompose_in_basis(v: &VectorField, basis: &[VectorField]) -> Result<BasisDecomposition> {
    let n = basis.len();
    let mut rows: BTreeMap<(usize, Expr), (Vec<Rational>, Expr)> = BTreeMap::new();
    for (k, b) in basis.iter().enumerate() {
        for (c, comp) in b.coefficients().into_iter().enumerate() {
            for (mono, coef) in point_polynomial(comp)? {
                let r = coef
                    .as_rational()
                    .cloned()
                    .ok_or_else(|| Error::Invalid(format!("basis coefficient is not rational: {coef}")))?;
                let row = rows.entry((c, mono)).or_insert_with(|| (vec![Rational::zero(); n], Expr::zero()));
                row.0[k] += r;
            }
        }
    }
    for (c, comp) in v.coefficients().into_iter().enumerate() {
        for (mono, coef) in point_polynomial(comp)? {
            let row = rows.entry((c, mono)).or_insert_with(|| (vec![Rational::zero(); n], Expr::zero()));
            row.1 = coef;
        }
    }
    let keys: Vec<(usize, Expr)> = rows.keys().cloned().collect();
    let mut mat: Vec<(Vec<Rational>, Expr)> = rows.into_values().collect();
    let mut pivots: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; mat.len()];
    for col in 0..n {
        let Some(p) = (0..mat.len()).find(|&r| !used[r] && !mat[r].0[col].is_zero()) else {
            return Err(Error::Invalid(format!("basis element {} is linearly dependent", col + 1)));
        };
        used[p] = true;
        pivots[col] = Some(p);
        let inv = Rational::one() / mat[p].0[col].clone();
        let (prow, prhs) = {
            let (row, rhs) = &mat[p];
            (row.iter().map(|a| a * &inv).collect::<Vec<_>>(), rhs.clone().scale_by(inv.clone()))
        };
        mat[p] = (prow.clone(), prhs.clone());
        for r in 0..mat.len() {
            if r == p || mat[r].0[col].is_zero() {
                continue;
            }
            let factor = mat[r].0[col].clone();
            for j in 0..n {
                let d = &factor * &prow[j];
                mat[r].0[j] -= d;
            }
            let rhs = std::mem::replace(&mut mat[r].1, Expr::zero());
            mat[r].1 = Expr::add([rhs, prhs.clone().scale_by(-factor)]);
        }
    }
    for (r, (_, rhs)) in mat.iter().enumerate() {
        if !used[r] && !symbolic_zero(rhs) {
            let (c, mono) = &keys[r];
            return Err(Error::NotInSpan { monomial: format!("{mono} in {}", COMPONENTS[*c]) });
        }
    }
    let coefficients = pivots.into_iter().map(|p| mat[p.expect("pivot")].1.clone()).collect();
    Ok(BasisDecomposition { coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conservation::construct_fluxes;
    use crate::expr::{Formal, SymbolTable};
    use crate::parse::parse;

    fn table() -> SymbolTable {
        let names: Vec<String> = ["a", "b", "p", "s", "m", "n", "c"]
            .iter()
            .flat_map(|l| (1..=7).map(move |k| format!("{l}{k}")))
            .collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        SymbolTable::new()
            .with_constants(&refs)
            .with_function("f", &[Formal::X])
            .with_function("g", &[Formal::Y])
            .with_function("xi", &[Formal::X])
            .with_function("eta", &[Formal::Y])
    }

    fn e(s: &str) -> Expr {
        parse(s, &table()).unwrap()
    }

    fn field(tau: &str, xi: &str, eta: &str, phi: &str) -> VectorField {
        VectorField::new(e(tau), e(xi), e(eta), e(phi)).unwrap()
    }

    fn link(v: &VectorField, f: &str, g: &str) -> SymmetryLinkResidual {
        conslaw_symmetry_residual(v, &construct_fluxes(&e(f), &e(g)).unwrap()).unwrap()
    }

    #[test]
    fn translation_in_t_is_linked_to_generic_fluxes() {
        assert!(link(&field("a1", "0", "0", "0"), "f(x)", "g(y)").is_zero());
    }

    #[test]
    fn x4_family_with_constant_weights() {
        let v = field("s4", "s5*x + s6", "(-s5 - s1)*y + s7", "s1*u");
        assert!(link(&v, "s2", "s3").is_zero());
    }

    #[test]
    fn translation_in_x_leaves_f_prime_u() {
        let r = link(&field("0", "1", "0", "0"), "f(x)", "g(y)");
        assert_eq!(r.r[0], e("f'(x)*u"));
    }

    #[test]
    fn x5_family_with_fractional_weight() {
        let v = field("m3*t + m4", "-m3*(x - m1)", "2*m3*(y + m2)", "0");
        assert!(link(&v, "x - m1", "(-2*(y + m2))^(-1/2)").is_zero());
    }

    #[test]
    fn case_two_operator_with_opaque_xi() {
        let v = field("c2", "xi(x)", "0", "-xi'(x)*u");
        assert!(link(&v, "0", "g(y)").is_zero());
    }

    #[test]
    fn system_contains_point_conditions() {
        let p = construct_fluxes(&e("f(x)"), &e("g(y)")).unwrap();
        let sys = generate_link_determining_system(&p, &opaque_field(["T", "X", "Y", "P"])).unwrap();
        let coeffs = sys.coefficients();
        let weight = e("f(x) + g(y)");
        let d = |name: &str, slot: Formal| {
            let s = FunctionSymbol::new(name, &[Formal::T, Formal::X, Formal::Y, Formal::U]);
            Expr::mul([weight.clone(), s.derivative_wrt(&[slot])])
        };
        for want in [d("T", Formal::U), d("X", Formal::Y), d("X", Formal::U), d("Y", Formal::X), d("Y", Formal::U)] {
            assert!(coeffs.contains(&want), "missing {want}");
        }
        let s = |n: &str| FunctionSymbol::new(n, &[Formal::T, Formal::X, Formal::Y, Formal::U]);
        let (xi, eta, phi) = (s("X").apply_formal(), s("Y").apply_formal(), s("P").apply_formal());
        let eighth = Expr::add([
            Expr::mul([
                Expr::u(),
                Expr::add([
                    Expr::mul([xi, e("f'(x)")]),
                    Expr::mul([eta, e("g'(y)")]),
                    Expr::mul([weight.clone(), Expr::add([s("X").derivative_wrt(&[Formal::X]), s("Y").derivative_wrt(&[Formal::Y])])]),
                ]),
            ]),
            Expr::mul([weight, phi]),
        ]);
        assert!(coeffs.contains(&eighth));
    }

    #[test]
    fn toy_vector_gives_divergence_condition() {
        let p = ConservedVector::new(Expr::u(), Expr::zero(), Expr::zero()).unwrap();
        let sys = generate_link_determining_system(&p, &opaque_field(["T", "X", "Y", "P"])).unwrap();
        let s = |n: &str| FunctionSymbol::new(n, &[Formal::T, Formal::X, Formal::Y, Formal::U]);
        let want = Expr::add([
            s("P").apply_formal(),
            Expr::mul([Expr::u(), s("X").derivative_wrt(&[Formal::X])]),
            Expr::mul([Expr::u(), s("Y").derivative_wrt(&[Formal::Y])]),
        ]);
        assert!(sys.coefficients().contains(&want), "{:?}", sys.coefficients());
    }

    #[test]
    fn decomposition_of_x5() {
        let v = field("m3*t + m4", "-m3*(x - m1)", "2*m3*(y + m2)", "0");
        let d = decompose_in_basis(&v, &ricci_basis()).unwrap();
        let want = ["m3", "m4", "m1*m3", "2*m2*m3", "-m3", "2*m3"].map(e);
        assert_eq!(d.coefficients, want.to_vec());
        assert_eq!(d.reconstruct(&ricci_basis()), v);
    }

    #[test]
    fn basis_element_decomposes_to_unit() {
        let d = decompose_in_basis(&ricci_basis()[2], &ricci_basis()).unwrap();
        assert_eq!(d.coefficients, ["0", "0", "1", "0", "0", "0"].map(e).to_vec());
    }

    #[test]
    fn quadratic_xi_is_outside_the_span() {
        let err = decompose_in_basis(&field("0", "x^2", "0", "0"), &ricci_basis()).unwrap_err();
        assert!(matches!(err, Error::NotInSpan { monomial } if monomial.contains("x^2")));
    }
}
