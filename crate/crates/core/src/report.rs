//! Zero testing and residual reports combining the symbolic and numeric
//! verdicts.

use serde::{Serialize, Serializer};

use crate::expr::{to_fraction, Expr};
use crate::numeric::{random_zero_test, NumericEvidence, NumericVerdict, SamplePlan, Witness};

/// True when `e` is zero in canonical form or after combining over a common
/// denominator.
pub fn symbolic_zero(e: &Expr) -> bool {
    e.is_zero() || to_fraction(e).num.is_zero()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroVerdict {
    Zero,
    Nonzero,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroTest {
    pub verdict: ZeroVerdict,
    pub symbolic: bool,
    pub witness: Option<Witness>,
    pub numeric: Option<NumericEvidence>,
}

/// Symbolic zero test with a sampling fallback. Numerically vanishing but
/// symbolically unresolved expressions are reported as undecided.
pub fn is_zero(e: &Expr, plan: &SamplePlan) -> ZeroTest {
    if symbolic_zero(e) {
        return ZeroTest { verdict: ZeroVerdict::Zero, symbolic: true, witness: None, numeric: None };
    }
    let ev = random_zero_test(e, plan);
    let verdict = match ev.verdict {
        NumericVerdict::Nonzero => ZeroVerdict::Nonzero,
        NumericVerdict::Zero | NumericVerdict::Undecided => ZeroVerdict::Undecided,
    };
    ZeroTest { verdict, symbolic: false, witness: ev.witness.clone(), numeric: Some(ev) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Zero,
    Nonzero,
    Constrained,
    Undecided,
}

pub fn serialize_expr<S: Serializer>(e: &Expr, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&e.to_string())
}

pub fn serialize_exprs<S: Serializer>(es: &[Expr], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(es.iter().map(|e| e.to_string()))
}

/// Verdict on a residual that should vanish identically.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResidualReport {
    pub verdict: Verdict,
    #[serde(serialize_with = "serialize_expr")]
    pub residual: Expr,
    /// Expressions whose vanishing makes the residual zero.
    #[serde(serialize_with = "serialize_exprs")]
    pub constraints: Vec<Expr>,
    pub symbolic_zero: bool,
    pub numeric: NumericEvidence,
    pub note: Option<String>,
}

impl ResidualReport {
    /// Zero requires both a symbolic zero and a numeric confirmation.
    pub fn evaluate(residual: Expr, plan: &SamplePlan) -> Self {
        let symbolic = symbolic_zero(&residual);
        let numeric = random_zero_test(&residual, plan);
        Self::from_parts(residual, symbolic, numeric)
    }

    /// Combines a symbolic decision with numeric evidence gathered separately.
    pub fn from_parts(residual: Expr, symbolic: bool, numeric: NumericEvidence) -> Self {
        let (verdict, note) = match (symbolic, numeric.verdict) {
            (true, NumericVerdict::Zero) => (Verdict::Zero, None),
            (true, NumericVerdict::Undecided) => {
                (Verdict::Undecided, Some("symbolically zero but every sample tripped a guard".into()))
            }
            (true, NumericVerdict::Nonzero) => {
                (Verdict::Nonzero, Some("symbolic and numeric verdicts disagree".into()))
            }
            (false, NumericVerdict::Nonzero) => (Verdict::Nonzero, None),
            (false, NumericVerdict::Zero) => {
                (Verdict::Undecided, Some("numerically zero but not reduced to zero symbolically".into()))
            }
            (false, NumericVerdict::Undecided) => {
                (Verdict::Undecided, Some("every sample tripped a singularity guard".into()))
            }
        };
        let residual = if symbolic { Expr::zero() } else { residual };
        ResidualReport { verdict, residual, constraints: Vec::new(), symbolic_zero: symbolic, numeric, note }
    }

    pub fn is_zero(&self) -> bool {
        self.verdict == Verdict::Zero
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{Formal, FunctionSymbol};
    use crate::jet::total_derivative;
    use crate::BaseVar;

    #[test]
    fn opaque_sum_cancels() {
        let f = FunctionSymbol::new("f", &[Formal::X]).apply_formal();
        let g = FunctionSymbol::new("g", &[Formal::Y]).apply_formal();
        let e = (&f + &g) - &f - &g;
        assert_eq!(is_zero(&e, &SamplePlan::default()).verdict, ZeroVerdict::Zero);
    }

    #[test]
    fn lambda_u_for_u_is_nonzero() {
        let t = is_zero(&Expr::u().diff(&Expr::u()), &SamplePlan::default());
        assert_eq!(t.verdict, ZeroVerdict::Nonzero);
        assert_eq!(t.witness.unwrap().value, 1.0);
    }

    #[test]
    fn log_form_of_the_flow() {
        let u = Expr::u();
        let rhs = Expr::jet(0, 1, 1) / &u - Expr::jet(0, 1, 0) * Expr::jet(0, 0, 1) / (&u * &u);
        let log_xy = total_derivative(&total_derivative(&Expr::log(u), BaseVar::X), BaseVar::Y);
        assert_eq!(is_zero(&(rhs - log_xy), &SamplePlan::default()).verdict, ZeroVerdict::Zero);
    }

    #[test]
    fn report_requires_numeric_confirmation() {
        let r = ResidualReport::evaluate(Expr::zero(), &SamplePlan::default());
        assert!(r.is_zero());
        let r = ResidualReport::evaluate(Expr::x(), &SamplePlan::default());
        assert_eq!(r.verdict, Verdict::Nonzero);
    }
}
