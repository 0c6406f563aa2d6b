//! Immutable expression trees over base variables, jet variables, symbolic
//! constants, opaque function applications and exact rationals.
//!
//! Every value produced by the smart constructors in [`build`] is in
//! canonical form: sums and products are flat, numeric factors are merged
//! into a single leading rational, products are fully distributed over sums,
//! and siblings are sorted by the derived total order on [`Expr`]. Structural
//! equality of canonical trees is therefore canonical-form equality.

mod build;
mod calculus;
mod fraction;
mod ops;
mod subst;
mod symbols;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub use calculus::{diff_partial, diff_partial_by_name};
pub use fraction::{content_strip, to_fraction, Fraction};
pub use subst::{substitute, substitute_function, Bindings};
pub use symbols::{Formal, FunctionSymbol, SymbolTable};

/// Exact rational coefficient.
pub type Rational = BigRational;

/// Independent variables of the jet space plus the two reduced variables
/// `v`, `w` used by similarity reductions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseVar {
    T,
    X,
    Y,
    V,
    W,
}

impl BaseVar {
    pub const TXY: [BaseVar; 3] = [BaseVar::T, BaseVar::X, BaseVar::Y];

    pub fn name(self) -> &'static str {
        match self {
            BaseVar::T => "t",
            BaseVar::X => "x",
            BaseVar::Y => "y",
            BaseVar::V => "v",
            BaseVar::W => "w",
        }
    }

    pub fn from_name(name: &str) -> Option<BaseVar> {
        Some(match name {
            "t" => BaseVar::T,
            "x" => BaseVar::X,
            "y" => BaseVar::Y,
            "v" => BaseVar::V,
            "w" => BaseVar::W,
            _ => return None,
        })
    }

    /// Position in the jet multi-index, for t, x, y only.
    pub fn jet_slot(self) -> Option<usize> {
        match self {
            BaseVar::T => Some(0),
            BaseVar::X => Some(1),
            BaseVar::Y => Some(2),
            _ => None,
        }
    }
}

/// A derivative `u_J` of the dependent variable, `J = (n_t, n_x, n_y)`.
///
/// Mixed partials commute, so `u_xy` and `u_yx` share one representation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct JetVar {
    idx: [u8; 3],
}

impl JetVar {
    pub const U: JetVar = JetVar { idx: [0, 0, 0] };

    pub fn new(nt: u8, nx: u8, ny: u8) -> Self {
        JetVar { idx: [nt, nx, ny] }
    }

    pub fn index(&self) -> [u8; 3] {
        self.idx
    }

    pub fn order(&self) -> u32 {
        self.idx.iter().map(|&n| n as u32).sum()
    }

    /// `u_{J+v}` for v in {t, x, y}.
    pub fn bump(&self, v: BaseVar) -> Option<JetVar> {
        let slot = v.jet_slot()?;
        let mut idx = self.idx;
        idx[slot] += 1;
        Some(JetVar { idx })
    }

    /// Letters of the suffix, e.g. `"xy"` for u_xy and `""` for u.
    pub fn suffix(&self) -> String {
        let mut s = String::new();
        for (slot, letter) in ['t', 'x', 'y'].into_iter().enumerate() {
            for _ in 0..self.idx[slot] {
                s.push(letter);
            }
        }
        s
    }
}

impl Ord for JetVar {
    // u < u_t < u_x < u_y < u_tt < u_tx < ...
    fn cmp(&self, other: &Self) -> Ordering {
        self.order()
            .cmp(&other.order())
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for JetVar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Application of an opaque function symbol to argument expressions, with a
/// derivative multi-index over the symbol's formal parameters.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FuncApp {
    pub sym: Arc<FunctionSymbol>,
    pub args: Vec<Expr>,
    pub deriv: Vec<u32>,
}

impl FuncApp {
    pub fn name(&self) -> &str {
        &self.sym.name
    }

    pub fn is_underived(&self) -> bool {
        self.deriv.iter().all(|&d| d == 0)
    }
}

/// Expression node. Variant declaration order is the sibling rank used by
/// canonical sorting.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Num(Rational),
    Const(Arc<str>),
    Var(BaseVar),
    Jet(JetVar),
    Func(Arc<FuncApp>),
    Exp(Arc<Expr>),
    Log(Arc<Expr>),
    Sin(Arc<Expr>),
    Cos(Arc<Expr>),
    Add(Arc<[Expr]>),
    Mul(Arc<[Expr]>),
    Pow(Arc<Expr>, i64),
    /// Real-exponent power, for exponents that are not integers.
    RPow(Arc<Expr>, Arc<Expr>),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(Rational::zero())
    }

    pub fn one() -> Expr {
        Expr::Num(Rational::one())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Num(Rational::from_integer(BigInt::from(n)))
    }

    pub fn rational(p: i64, q: i64) -> Expr {
        Expr::Num(Rational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn konst(name: &str) -> Expr {
        Expr::Const(Arc::from(name))
    }

    pub fn var(v: BaseVar) -> Expr {
        Expr::Var(v)
    }

    pub fn t() -> Expr {
        Expr::Var(BaseVar::T)
    }

    pub fn x() -> Expr {
        Expr::Var(BaseVar::X)
    }

    pub fn y() -> Expr {
        Expr::Var(BaseVar::Y)
    }

    pub fn u() -> Expr {
        Expr::Jet(JetVar::U)
    }

    pub fn jet(nt: u8, nx: u8, ny: u8) -> Expr {
        Expr::Jet(JetVar::new(nt, nx, ny))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Num(r) if r.is_one())
    }

    pub fn as_rational(&self) -> Option<&Rational> {
        match self {
            Expr::Num(r) => Some(r),
            _ => None,
        }
    }

    /// Integer value of a numeric node, if it has one.
    pub fn as_integer(&self) -> Option<i64> {
        match self {
            Expr::Num(r) if r.is_integer() => i64::try_from(r.to_integer()).ok(),
            _ => None,
        }
    }

    /// Summands of a sum, or the expression itself.
    pub fn terms(&self) -> Vec<Expr> {
        match self {
            Expr::Add(ts) => ts.to_vec(),
            e if e.is_zero() => Vec::new(),
            e => vec![e.clone()],
        }
    }

    /// Factors of a product, or the expression itself.
    pub fn factors(&self) -> Vec<Expr> {
        match self {
            Expr::Mul(fs) => fs.to_vec(),
            e => vec![e.clone()],
        }
    }

    /// Splits a canonical term into its numeric coefficient and the rest.
    pub fn split_coefficient(&self) -> (Rational, Expr) {
        match self {
            Expr::Num(r) => (r.clone(), Expr::one()),
            Expr::Mul(fs) => match fs.first() {
                Some(Expr::Num(c)) => {
                    let rest = &fs[1..];
                    let rest = if rest.len() == 1 {
                        rest[0].clone()
                    } else {
                        Expr::Mul(Arc::from(rest))
                    };
                    (c.clone(), rest)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Func(app) => app.args.iter().for_each(|a| a.walk(f)),
            Expr::Exp(a) | Expr::Log(a) | Expr::Sin(a) | Expr::Cos(a) | Expr::Pow(a, _) => a.walk(f),
            Expr::Add(xs) | Expr::Mul(xs) => xs.iter().for_each(|a| a.walk(f)),
            Expr::RPow(b, e) => {
                b.walk(f);
                e.walk(f);
            }
            _ => {}
        }
    }

    pub fn any(&self, pred: &mut impl FnMut(&Expr) -> bool) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if !found && pred(e) {
                found = true;
            }
        });
        found
    }

    pub fn contains_var(&self, v: BaseVar) -> bool {
        self.any(&mut |e| matches!(e, Expr::Var(w) if *w == v))
    }

    pub fn contains_jet(&self, j: JetVar) -> bool {
        self.any(&mut |e| matches!(e, Expr::Jet(k) if *k == j))
    }

    /// Jet variables occurring anywhere, sorted.
    pub fn jet_vars(&self) -> Vec<JetVar> {
        let mut out = std::collections::BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Jet(j) = e {
                out.insert(*j);
            }
        });
        out.into_iter().collect()
    }

    pub fn max_jet_order(&self) -> u32 {
        self.jet_vars().iter().map(JetVar::order).max().unwrap_or(0)
    }

    /// Names of symbolic constants, sorted.
    pub fn constants(&self) -> Vec<Arc<str>> {
        let mut out = std::collections::BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Const(c) = e {
                out.insert(c.clone());
            }
        });
        out.into_iter().collect()
    }

    /// Function symbols applied anywhere, sorted by name.
    pub fn function_symbols(&self) -> Vec<Arc<FunctionSymbol>> {
        let mut out = std::collections::BTreeMap::new();
        self.walk(&mut |e| {
            if let Expr::Func(app) = e {
                out.insert(app.sym.name.clone(), app.sym.clone());
            }
        });
        out.into_values().collect()
    }

    pub fn contains_function(&self, name: &str) -> bool {
        self.any(&mut |e| matches!(e, Expr::Func(app) if &*app.sym.name == name))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

pub use build::normalize;

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::print::print_canonical(self))
    }
}
