use super::{BaseVar, Expr, FuncApp, JetVar};
use crate::error::{Error, Result};

/// Partial derivative with respect to a base variable or a jet variable,
/// every other coordinate held fixed. Function applications differentiate
/// through their explicit arguments only.
pub fn diff_partial(e: &Expr, wrt: &Expr) -> Expr {
    debug_assert!(matches!(wrt, Expr::Var(_) | Expr::Jet(_)));
    d(e, wrt)
}

/// Name-based entry point: `t`, `x`, `y`, `v`, `w`, `u`, or a jet such as
/// `u_xy`.
pub fn diff_partial_by_name(e: &Expr, name: &str) -> Result<Expr> {
    let wrt = variable_from_name(name).ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
    Ok(d(e, &wrt))
}

pub(crate) fn variable_from_name(name: &str) -> Option<Expr> {
    if let Some(v) = BaseVar::from_name(name) {
        return Some(Expr::Var(v));
    }
    let rest = name.strip_prefix('u').or_else(|| name.strip_prefix('U'))?;
    if rest.is_empty() {
        return Some(Expr::Jet(JetVar::U));
    }
    let letters = rest.strip_prefix('_')?;
    if letters.is_empty() {
        return None;
    }
    let mut idx = [0u8; 3];
    for c in letters.chars() {
        match c {
            't' => idx[0] += 1,
            'x' => idx[1] += 1,
            'y' => idx[2] += 1,
            _ => return None,
        }
    }
    Some(Expr::Jet(JetVar::new(idx[0], idx[1], idx[2])))
}

fn d(e: &Expr, wrt: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Const(_) => Expr::zero(),
        Expr::Var(_) | Expr::Jet(_) => {
            if e == wrt {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Func(app) => {
            let mut terms = Vec::new();
            for (slot, arg) in app.args.iter().enumerate() {
                let da = d(arg, wrt);
                if da.is_zero() {
                    continue;
                }
                let mut deriv = app.deriv.clone();
                deriv[slot] += 1;
                let bumped = Expr::func(FuncApp {
                    sym: app.sym.clone(),
                    args: app.args.clone(),
                    deriv,
                });
                terms.push(Expr::mul([bumped, da]));
            }
            Expr::add(terms)
        }
        Expr::Exp(a) => Expr::mul([e.clone(), d(a, wrt)]),
        Expr::Log(a) => Expr::mul([d(a, wrt), Expr::pow((**a).clone(), -1)]),
        Expr::Sin(a) => Expr::mul([d(a, wrt), Expr::cos((**a).clone())]),
        Expr::Cos(a) => Expr::mul([Expr::int(-1), d(a, wrt), Expr::sin((**a).clone())]),
        Expr::Add(ts) => Expr::add(ts.iter().map(|t| d(t, wrt))),
        Expr::Mul(fs) => {
            let mut terms = Vec::with_capacity(fs.len());
            for i in 0..fs.len() {
                let di = d(&fs[i], wrt);
                if di.is_zero() {
                    continue;
                }
                let mut prod: Vec<Expr> = Vec::with_capacity(fs.len());
                for (j, f) in fs.iter().enumerate() {
                    prod.push(if i == j { di.clone() } else { f.clone() });
                }
                terms.push(Expr::mul(prod));
            }
            Expr::add(terms)
        }
        Expr::Pow(b, k) => {
            let db = d(b, wrt);
            if db.is_zero() {
                return Expr::zero();
            }
            Expr::mul([Expr::int(*k), Expr::pow((**b).clone(), k - 1), db])
        }
        Expr::RPow(b, x) => {
            let db = d(b, wrt);
            let dx = d(x, wrt);
            let mut terms = Vec::new();
            if !db.is_zero() {
                // x * b^(x-1) * b'
                let lowered = Expr::rpow((**b).clone(), Expr::add([(**x).clone(), Expr::int(-1)]));
                terms.push(Expr::mul([(**x).clone(), lowered, db]));
            }
            if !dx.is_zero() {
                terms.push(Expr::mul([e.clone(), Expr::log((**b).clone()), dx]));
            }
            Expr::add(terms)
        }
    }
}

impl Expr {
    /// Partial derivative; see [`diff_partial`].
    pub fn diff(&self, wrt: &Expr) -> Expr {
        d(self, wrt)
    }

    pub fn diff_var(&self, v: BaseVar) -> Expr {
        d(self, &Expr::Var(v))
    }

    pub fn diff_jet(&self, j: JetVar) -> Expr {
        d(self, &Expr::Jet(j))
    }
}
