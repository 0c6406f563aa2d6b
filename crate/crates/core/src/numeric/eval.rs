//! Floating-point evaluation with singularity guards.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::expr::{BaseVar, Expr, FuncApp, JetVar};

/// Polynomial over a function symbol's formal slots.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Poly {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Poly {
    /// Value of `∂^deriv p` at `args`, differentiating each monomial exactly.
    pub fn eval_deriv(&self, deriv: &[u32], args: &[f64]) -> f64 {
        let mut total = 0.0;
        'terms: for (c, exps) in &self.terms {
            let mut v = *c;
            for ((&n, &k), &a) in exps.iter().zip(deriv).zip(args) {
                if k > n {
                    continue 'terms;
                }
                for m in (n - k + 1)..=n {
                    v *= m as f64;
                }
                v *= a.powi((n - k) as i32);
            }
            total += v;
        }
        total
    }

    pub fn eval(&self, args: &[f64]) -> f64 {
        self.eval_deriv(&vec![0; args.len()], args)
    }
}

/// Concrete stand-ins for the opaque symbols of an expression.
#[derive(Clone, Debug, Default)]
pub struct Realization {
    pub functions: BTreeMap<Arc<str>, Poly>,
    pub constants: BTreeMap<Arc<str>, f64>,
}

/// Coordinates of an evaluation point.
#[derive(Clone, Debug, Default)]
pub struct Point {
    pub vars: BTreeMap<BaseVar, f64>,
    pub jets: BTreeMap<JetVar, f64>,
}

impl Point {
    pub fn with_var(mut self, v: BaseVar, value: f64) -> Self {
        self.vars.insert(v, value);
        self
    }

    pub fn with_jet(mut self, j: JetVar, value: f64) -> Self {
        self.jets.insert(j, value);
        self
    }

    /// Named coordinates for diagnostics, e.g. `("u_x", 0.3)`.
    pub fn labelled(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self.vars.iter().map(|(v, &x)| (v.name().to_string(), x)).collect();
        out.extend(self.jets.iter().map(|(j, &x)| (jet_name(*j), x)));
        out
    }
}

pub fn jet_name(j: JetVar) -> String {
    let s = j.suffix();
    if s.is_empty() {
        "u".to_string()
    } else {
        format!("u_{s}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalError {
    /// A singularity guard tripped; the caller should resample.
    Guard(&'static str),
    /// A symbol has no value at this point.
    Unbound(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Guard(why) => write!(f, "singularity guard: {why}"),
            EvalError::Unbound(name) => write!(f, "no value for '{name}'"),
        }
    }
}

impl std::error::Error for EvalError {}

/// Result of one guarded evaluation.
#[derive(Clone, Copy, Debug)]
pub struct Evaluated {
    pub value: f64,
    /// Largest magnitude of any intermediate node, used to scale tolerances.
    pub scale: f64,
}

pub struct Evaluator<'a> {
    pub realization: &'a Realization,
    pub point: &'a Point,
    /// Denominators smaller than this in magnitude trip the guard.
    pub guard: f64,
    scale: f64,
}

impl<'a> Evaluator<'a> {
    pub fn new(realization: &'a Realization, point: &'a Point, guard: f64) -> Self {
        Evaluator { realization, point, guard, scale: 0.0 }
    }

    pub fn run(mut self, e: &Expr) -> Result<Evaluated, EvalError> {
        let value = self.eval(e)?;
        Ok(Evaluated { value, scale: self.scale })
    }

    fn note(&mut self, v: f64) -> Result<f64, EvalError> {
        if !v.is_finite() {
            return Err(EvalError::Guard("non-finite value"));
        }
        self.scale = self.scale.max(v.abs());
        Ok(v)
    }

    fn eval(&mut self, e: &Expr) -> Result<f64, EvalError> {
        let v = match e {
            Expr::Num(r) => rational_to_f64(r),
            Expr::Const(c) => *self
                .realization
                .constants
                .get(c)
                .ok_or_else(|| EvalError::Unbound(c.to_string()))?,
            Expr::Var(v) => *self
                .point
                .vars
                .get(v)
                .ok_or_else(|| EvalError::Unbound(v.name().to_string()))?,
            Expr::Jet(j) => *self.point.jets.get(j).ok_or_else(|| EvalError::Unbound(jet_name(*j)))?,
            Expr::Func(app) => self.func(app)?,
            Expr::Exp(a) => self.eval(a)?.exp(),
            Expr::Log(a) => {
                let x = self.eval(a)?;
                if x <= self.guard {
                    return Err(EvalError::Guard("log of a non-positive value"));
                }
                x.ln()
            }
            Expr::Sin(a) => self.eval(a)?.sin(),
            Expr::Cos(a) => self.eval(a)?.cos(),
            Expr::Add(ts) => {
                let mut s = 0.0;
                for t in ts.iter() {
                    s += self.eval(t)?;
                }
                s
            }
            Expr::Mul(fs) => {
                let mut p = 1.0;
                for f in fs.iter() {
                    p *= self.eval(f)?;
                }
                p
            }
            Expr::Pow(b, k) => {
                let x = self.eval(b)?;
                if *k < 0 && x.abs() < self.guard {
                    return Err(EvalError::Guard("denominator near zero"));
                }
                x.powi(i32::try_from(*k).map_err(|_| EvalError::Guard("exponent overflow"))?)
            }
            Expr::RPow(b, x) => {
                let base = self.eval(b)?;
                let ex = self.eval(x)?;
                if base <= 0.0 || base < self.guard {
                    return Err(EvalError::Guard("non-positive base under a real power"));
                }
                base.powf(ex)
            }
        };
        self.note(v)
    }

    fn func(&mut self, app: &FuncApp) -> Result<f64, EvalError> {
        let poly = self
            .realization
            .functions
            .get(&app.sym.name)
            .ok_or_else(|| EvalError::Unbound(app.sym.name.to_string()))?;
        let mut args = Vec::with_capacity(app.args.len());
        for a in &app.args {
            args.push(self.eval(a)?);
        }
        Ok(poly.eval_deriv(&app.deriv, &args))
    }
}

pub fn rational_to_f64(r: &crate::expr::Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Evaluates `e` at `point` with the given realization and guard threshold.
pub fn eval_point(e: &Expr, realization: &Realization, point: &Point, guard: f64) -> Result<f64, EvalError> {
    Evaluator::new(realization, point, guard).run(e).map(|r| r.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_of_jets() {
        let (u, ux, uy) = (Expr::u(), Expr::jet(0, 1, 0), Expr::jet(0, 0, 1));
        let e = &ux * &uy / (&u * &u);
        let p = Point::default()
            .with_jet(JetVar::U, 2.0)
            .with_jet(JetVar::new(0, 1, 0), 3.0)
            .with_jet(JetVar::new(0, 0, 1), 4.0);
        assert_eq!(eval_point(&e, &Realization::default(), &p, 1e-6).unwrap(), 3.0);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // p(x) = 2 + 3x^2 - x^4
        let p = Poly { terms: vec![(2.0, vec![0]), (3.0, vec![2]), (-1.0, vec![4])] };
        assert_eq!(p.eval(&[2.0]), 2.0 + 12.0 - 16.0);
        assert_eq!(p.eval_deriv(&[1], &[2.0]), 12.0 - 32.0);
        assert_eq!(p.eval_deriv(&[2], &[2.0]), 6.0 - 48.0);
        assert_eq!(p.eval_deriv(&[5], &[2.0]), 0.0);
    }

    #[test]
    fn guards_trip() {
        let x = Expr::x();
        let p = Point::default().with_var(BaseVar::X, 0.0);
        let r = Realization::default();
        assert!(matches!(eval_point(&Expr::pow(x.clone(), -1), &r, &p, 1e-6), Err(EvalError::Guard(_))));
        let neg = Point::default().with_var(BaseVar::X, -1.0);
        let half = Expr::rpow(x.clone(), Expr::rational(1, 2));
        assert!(matches!(eval_point(&half, &r, &neg, 1e-6), Err(EvalError::Guard(_))));
        assert!(matches!(eval_point(&Expr::log(x), &r, &neg, 1e-6), Err(EvalError::Guard(_))));
    }
}
