use std::collections::{BTreeMap, HashMap};

use super::{Expr, FuncApp, FunctionSymbol};

/// Simultaneous substitution map. Keys are canonical variables, jet
/// variables, constants or function applications.
pub type Bindings = BTreeMap<Expr, Expr>;

/// Replaces every occurrence of a key by its value, simultaneously, and
/// returns the canonical result. Replacement values are not rescanned.
pub fn substitute(e: &Expr, bindings: &Bindings) -> Expr {
    if bindings.is_empty() {
        return e.clone();
    }
    subst(e, bindings)
}

fn subst(e: &Expr, b: &Bindings) -> Expr {
    if let Some(v) = b.get(e) {
        return v.clone();
    }
    match e {
        Expr::Num(_) | Expr::Const(_) | Expr::Var(_) | Expr::Jet(_) => e.clone(),
        Expr::Func(app) => {
            let app = FuncApp {
                sym: app.sym.clone(),
                args: app.args.iter().map(|a| subst(a, b)).collect(),
                deriv: app.deriv.clone(),
            };
            // The rebuilt application may itself be a key.
            let rebuilt = Expr::func(app);
            b.get(&rebuilt).cloned().unwrap_or(rebuilt)
        }
        Expr::Exp(a) => Expr::exp(subst(a, b)),
        Expr::Log(a) => Expr::log(subst(a, b)),
        Expr::Sin(a) => Expr::sin(subst(a, b)),
        Expr::Cos(a) => Expr::cos(subst(a, b)),
        Expr::Add(ts) => Expr::add(ts.iter().map(|t| subst(t, b))),
        Expr::Mul(fs) => Expr::mul(fs.iter().map(|f| subst(f, b))),
        Expr::Pow(base, k) => Expr::pow(subst(base, b), *k),
        Expr::RPow(base, x) => Expr::rpow(subst(base, b), subst(x, b)),
    }
}

/// Replaces an opaque function by a concrete body written in the symbol's
/// formal variables. Derivatives of the function become derivatives of the
/// body, and the formal variables are then bound to the actual arguments.
pub fn substitute_function(e: &Expr, sym: &FunctionSymbol, body: &Expr) -> Expr {
    let mut derivs = HashMap::new();
    subst_fn(e, sym, body, &mut derivs)
}

fn body_derivative(sym: &FunctionSymbol, body: &Expr, deriv: &[u32], cache: &mut HashMap<Vec<u32>, Expr>) -> Expr {
    if let Some(v) = cache.get(deriv) {
        return v.clone();
    }
    let mut out = body.clone();
    for (slot, &n) in deriv.iter().enumerate() {
        let wrt = sym.params[slot].as_expr();
        for _ in 0..n {
            out = out.diff(&wrt);
        }
    }
    cache.insert(deriv.to_vec(), out.clone());
    out
}

fn subst_fn(
    e: &Expr,
    sym: &FunctionSymbol,
    body: &Expr,
    derivs: &mut HashMap<Vec<u32>, Expr>,
) -> Expr {
    match e {
        Expr::Num(_) | Expr::Const(_) | Expr::Var(_) | Expr::Jet(_) => e.clone(),
        Expr::Func(app) => {
            let args: Vec<Expr> = app.args.iter().map(|a| subst_fn(a, sym, body, derivs)).collect();
            if *app.sym == *sym {
                let derived = body_derivative(sym, body, &app.deriv, derivs);
                let formal: Bindings = sym
                    .params
                    .iter()
                    .zip(args)
                    .map(|(p, a)| (p.as_expr(), a))
                    .filter(|(p, a)| p != a)
                    .collect();
                substitute(&derived, &formal)
            } else {
                Expr::func(FuncApp {
                    sym: app.sym.clone(),
                    args,
                    deriv: app.deriv.clone(),
                })
            }
        }
        Expr::Exp(a) => Expr::exp(subst_fn(a, sym, body, derivs)),
        Expr::Log(a) => Expr::log(subst_fn(a, sym, body, derivs)),
        Expr::Sin(a) => Expr::sin(subst_fn(a, sym, body, derivs)),
        Expr::Cos(a) => Expr::cos(subst_fn(a, sym, body, derivs)),
        Expr::Add(ts) => Expr::add(ts.iter().map(|t| subst_fn(t, sym, body, derivs))),
        Expr::Mul(fs) => Expr::mul(fs.iter().map(|f| subst_fn(f, sym, body, derivs))),
        Expr::Pow(b, k) => Expr::pow(subst_fn(b, sym, body, derivs), *k),
        Expr::RPow(b, x) => Expr::rpow(
            subst_fn(b, sym, body, derivs),
            subst_fn(x, sym, body, derivs),
        ),
    }
}

impl Expr {
    /// Single-key convenience wrapper around [`substitute`].
    pub fn subs(&self, key: &Expr, value: &Expr) -> Expr {
        let mut b = Bindings::new();
        b.insert(key.clone(), value.clone());
        substitute(self, &b)
    }
}
