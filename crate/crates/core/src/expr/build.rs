//! Canonicalizing constructors. Each assumes canonical inputs and returns a
//! canonical result, so trees built only through these never need a second
//! normalization pass.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::{Expr, FuncApp, Rational};

/// Returns the canonical form of an arbitrary (possibly hand-built) tree.
pub fn normalize(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) | Expr::Const(_) | Expr::Var(_) | Expr::Jet(_) => e.clone(),
        Expr::Func(app) => Expr::Func(Arc::new(FuncApp {
            sym: app.sym.clone(),
            args: app.args.iter().map(normalize).collect(),
            deriv: app.deriv.clone(),
        })),
        Expr::Exp(a) => Expr::exp(normalize(a)),
        Expr::Log(a) => Expr::log(normalize(a)),
        Expr::Sin(a) => Expr::sin(normalize(a)),
        Expr::Cos(a) => Expr::cos(normalize(a)),
        Expr::Add(ts) => Expr::add(ts.iter().map(normalize)),
        Expr::Mul(fs) => Expr::mul(fs.iter().map(normalize)),
        Expr::Pow(b, k) => Expr::pow(normalize(b), *k),
        Expr::RPow(b, x) => Expr::rpow(normalize(b), normalize(x)),
    }
}

fn rational_pow(c: &Rational, k: i64) -> Option<Rational> {
    if c.is_zero() && k < 0 {
        return None;
    }
    let k32 = i32::try_from(k).ok()?;
    Some(num_traits::Pow::pow(c, k32))
}

impl Expr {
    pub fn add<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut constant = Rational::zero();
        let mut like: BTreeMap<Expr, Rational> = BTreeMap::new();
        let push = |t: Expr, constant: &mut Rational, like: &mut BTreeMap<Expr, Rational>| {
            let (c, rest) = t.split_coefficient();
            if rest.is_one() {
                *constant += c;
            } else {
                *like.entry(rest).or_insert_with(Rational::zero) += c;
            }
        };
        for t in terms {
            match t {
                Expr::Add(ts) => {
                    for s in ts.iter() {
                        push(s.clone(), &mut constant, &mut like);
                    }
                }
                t => push(t, &mut constant, &mut like),
            }
        }
        let mut out: Vec<Expr> = Vec::with_capacity(like.len() + 1);
        if !constant.is_zero() {
            out.push(Expr::Num(constant));
        }
        for (rest, c) in like {
            if !c.is_zero() {
                out.push(scale(c, rest));
            }
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => {
                out.sort();
                Expr::Add(Arc::from(out))
            }
        }
    }

    pub fn mul<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = Rational::one();
        let mut bases: BTreeMap<Expr, Expr> = BTreeMap::new();
        let mut exp_args: Vec<Expr> = Vec::new();
        for f in factors {
            absorb(f, &mut coeff, &mut bases, &mut exp_args);
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        let mut plain: Vec<Expr> = Vec::new();
        let mut sums: Vec<Expr> = Vec::new();
        for (base, exponent) in bases {
            power_parts(base, exponent, &mut coeff, &mut plain, &mut sums);
        }
        if !exp_args.is_empty() {
            let arg = Expr::add(exp_args);
            match Expr::exp(arg) {
                Expr::Exp(a) => plain.push(Expr::Exp(a)),
                other => {
                    // exp(log b) collapsed to b; fold it back in.
                    let mut rest = plain;
                    rest.extend(sums);
                    rest.push(Expr::Num(coeff));
                    rest.push(other);
                    return Expr::mul(rest);
                }
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        let head = build_product(coeff, plain);
        if sums.is_empty() {
            return head;
        }
        let mut acc = vec![head];
        for s in sums {
            let mut next = Vec::with_capacity(acc.len() * 2);
            for a in &acc {
                for t in s.terms() {
                    next.push(Expr::mul([a.clone(), t]));
                }
            }
            acc = next;
        }
        Expr::add(acc)
    }

    pub fn pow(b: Expr, k: i64) -> Expr {
        match (k, b) {
            (0, _) => Expr::one(),
            (1, b) => b,
            (k, Expr::Num(c)) => match rational_pow(&c, k) {
                Some(r) => Expr::Num(r),
                None => Expr::Pow(Arc::new(Expr::Num(c)), k),
            },
            (k, Expr::Mul(fs)) => Expr::mul(fs.iter().map(|f| Expr::pow(f.clone(), k))),
            (k, Expr::Pow(c, j)) => Expr::pow((*c).clone(), j * k),
            (k, Expr::RPow(c, x)) => {
                Expr::rpow((*c).clone(), Expr::mul([Expr::int(k), (*x).clone()]))
            }
            (k, Expr::Exp(a)) => Expr::exp(Expr::mul([Expr::int(k), (*a).clone()])),
            (k, b) => Expr::mul([Expr::Pow(Arc::new(b), k)]),
        }
    }

    pub fn rpow(b: Expr, x: Expr) -> Expr {
        if let Some(k) = x.as_integer() {
            return Expr::pow(b, k);
        }
        if b.is_one() {
            return Expr::one();
        }
        match b {
            Expr::Mul(fs) => {
                let negative = matches!(fs.first(), Some(Expr::Num(c)) if c.is_negative());
                if negative {
                    Expr::RPow(Arc::new(Expr::Mul(fs)), Arc::new(x))
                } else {
                    Expr::mul(fs.iter().map(|f| Expr::rpow(f.clone(), x.clone())))
                }
            }
            Expr::Pow(c, j) => Expr::rpow((*c).clone(), Expr::mul([Expr::int(j), x])),
            Expr::RPow(c, y) => Expr::rpow((*c).clone(), Expr::mul([(*y).clone(), x])),
            Expr::Exp(a) => Expr::exp(Expr::mul([(*a).clone(), x])),
            Expr::Num(c) if !c.is_positive() => Expr::RPow(Arc::new(Expr::Num(c)), Arc::new(x)),
            b => Expr::mul([Expr::RPow(Arc::new(b), Arc::new(x))]),
        }
    }

    pub fn exp(a: Expr) -> Expr {
        match a {
            a if a.is_zero() => Expr::one(),
            Expr::Log(b) => (*b).clone(),
            a => Expr::Exp(Arc::new(a)),
        }
    }

    pub fn log(a: Expr) -> Expr {
        match a {
            a if a.is_one() => Expr::zero(),
            Expr::Exp(b) => (*b).clone(),
            a => Expr::Log(Arc::new(a)),
        }
    }

    pub fn sin(a: Expr) -> Expr {
        if a.is_zero() {
            return Expr::zero();
        }
        Expr::Sin(Arc::new(a))
    }

    pub fn cos(a: Expr) -> Expr {
        if a.is_zero() {
            return Expr::one();
        }
        Expr::Cos(Arc::new(a))
    }

    pub fn func(app: FuncApp) -> Expr {
        Expr::Func(Arc::new(app))
    }

    pub fn neg(self) -> Expr {
        Expr::mul([Expr::int(-1), self])
    }

    pub fn recip(self) -> Expr {
        Expr::pow(self, -1)
    }

    pub fn scale_by(self, c: Rational) -> Expr {
        Expr::mul([Expr::Num(c), self])
    }
}

fn scale(c: Rational, rest: Expr) -> Expr {
    if c.is_one() {
        return rest;
    }
    let mut fs = vec![Expr::Num(c)];
    match rest {
        Expr::Mul(xs) => fs.extend(xs.iter().cloned()),
        r => fs.push(r),
    }
    Expr::Mul(Arc::from(fs))
}

fn absorb(f: Expr, coeff: &mut Rational, bases: &mut BTreeMap<Expr, Expr>, exp_args: &mut Vec<Expr>) {
    match f {
        Expr::Num(c) => *coeff *= c,
        Expr::Mul(fs) => {
            for g in fs.iter() {
                absorb(g.clone(), coeff, bases, exp_args);
            }
        }
        Expr::Pow(b, k) => match &*b {
            Expr::Num(_) | Expr::Mul(_) | Expr::Pow(..) | Expr::RPow(..) | Expr::Exp(_) => {
                match Expr::pow((*b).clone(), k) {
                    Expr::Pow(b2, k2) if matches!(*b2, Expr::Num(_)) => bump(bases, (*b2).clone(), Expr::int(k2)),
                    other => absorb(other, coeff, bases, exp_args),
                }
            }
            _ => bump(bases, (*b).clone(), Expr::int(k)),
        },
        Expr::RPow(b, x) => bump(bases, (*b).clone(), (*x).clone()),
        Expr::Exp(a) => exp_args.push((*a).clone()),
        other => bump(bases, other, Expr::one()),
    }
}

fn bump(bases: &mut BTreeMap<Expr, Expr>, base: Expr, by: Expr) {
    match bases.get_mut(&base) {
        Some(e) => *e = Expr::add([e.clone(), by]),
        None => {
            bases.insert(base, by);
        }
    }
}

/// Rational constant part of an exponent expression.
fn constant_part(x: &Expr) -> Rational {
    match x {
        Expr::Num(r) => r.clone(),
        Expr::Add(ts) => match ts.first() {
            Some(Expr::Num(r)) => r.clone(),
            _ => Rational::zero(),
        },
        _ => Rational::zero(),
    }
}

fn power_parts(base: Expr, exponent: Expr, coeff: &mut Rational, plain: &mut Vec<Expr>, sums: &mut Vec<Expr>) {
    if exponent.is_zero() {
        return;
    }
    if let Some(k) = exponent.as_integer() {
        integer_part(base, k, coeff, plain, sums);
        return;
    }
    match base {
        Expr::Add(_) => {
            // Keep the fractional remainder's constant part in [0, 1).
            let k = constant_part(&exponent).floor().to_integer();
            let k = i64::try_from(k).unwrap_or(0);
            let rest = Expr::add([exponent, Expr::int(-k)]);
            integer_part(base.clone(), k, coeff, plain, sums);
            plain.push(Expr::RPow(Arc::new(base), Arc::new(rest)));
        }
        Expr::Num(c) if c.is_one() => {}
        base => plain.push(Expr::RPow(Arc::new(base), Arc::new(exponent))),
    }
}

fn integer_part(base: Expr, k: i64, coeff: &mut Rational, plain: &mut Vec<Expr>, sums: &mut Vec<Expr>) {
    if k == 0 {
        return;
    }
    match base {
        Expr::Num(c) => match rational_pow(&c, k) {
            Some(r) => *coeff *= r,
            None => plain.push(Expr::Pow(Arc::new(Expr::Num(c)), k)),
        },
        Expr::Add(_) if k > 0 => {
            for _ in 0..k {
                sums.push(base.clone());
            }
        }
        b if k == 1 => plain.push(b),
        b => plain.push(Expr::Pow(Arc::new(b), k)),
    }
}

fn build_product(coeff: Rational, mut plain: Vec<Expr>) -> Expr {
    plain.sort();
    if plain.is_empty() {
        return Expr::Num(coeff);
    }
    if coeff.is_one() && plain.len() == 1 {
        return plain.pop().unwrap();
    }
    let mut fs = Vec::with_capacity(plain.len() + 1);
    if !coeff.is_one() {
        fs.push(Expr::Num(coeff));
    }
    fs.extend(plain);
    Expr::Mul(Arc::from(fs))
}

/// Greatest common divisor helper for integer content.
pub(crate) fn rational_gcd(a: &Rational, b: &Rational) -> Rational {
    let n = a.numer().gcd(b.numer());
    let d = a.denom().lcm(b.denom());
    Rational::new(n, d)
}
