//! Combination over a common denominator, the symbolic backbone of zero
//! testing. Only sums raised to negative powers are moved into the
//! denominator; simple atoms keep negative exponents in the numerator, which
//! is then a Laurent polynomial in atoms.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::build::rational_gcd;
use super::{Expr, Rational};

#[derive(Clone, Debug, PartialEq)]
pub struct Fraction {
    pub num: Expr,
    /// Sum-valued denominator factors with their multiplicities.
    pub den: BTreeMap<Expr, u32>,
}

impl Fraction {
    fn atom(e: Expr) -> Self {
        Fraction { num: e, den: BTreeMap::new() }
    }

    pub fn den_expr(&self) -> Expr {
        Expr::mul(self.den.iter().map(|(b, &k)| Expr::pow(b.clone(), k as i64)))
    }

    pub fn to_expr(&self) -> Expr {
        Expr::mul([self.num.clone(), Expr::pow(self.den_expr(), -1)])
    }
}

pub fn to_fraction(e: &Expr) -> Fraction {
    match e {
        Expr::Add(ts) => {
            let parts: Vec<Fraction> = ts.iter().map(to_fraction).collect();
            let mut den: BTreeMap<Expr, u32> = BTreeMap::new();
            for p in &parts {
                for (b, &k) in &p.den {
                    let slot = den.entry(b.clone()).or_insert(0);
                    *slot = (*slot).max(k);
                }
            }
            let num = Expr::add(parts.into_iter().map(|p| {
                let mut fs = vec![p.num];
                for (b, &k) in &den {
                    let missing = k - p.den.get(b).copied().unwrap_or(0);
                    if missing > 0 {
                        fs.push(Expr::pow(b.clone(), missing as i64));
                    }
                }
                Expr::mul(fs)
            }));
            Fraction { num, den }
        }
        Expr::Mul(fs) => {
            let mut den: BTreeMap<Expr, u32> = BTreeMap::new();
            let mut nums = Vec::with_capacity(fs.len());
            for f in fs.iter() {
                let p = to_fraction(f);
                nums.push(p.num);
                for (b, k) in p.den {
                    *den.entry(b).or_insert(0) += k;
                }
            }
            Fraction { num: Expr::mul(nums), den }
        }
        Expr::Pow(b, k) if *k < 0 && matches!(**b, Expr::Add(_)) => {
            let inner = to_fraction(b);
            let m = k.unsigned_abs() as u32;
            let lifted = Expr::pow(inner.den_expr(), m as i64);
            match inner.num {
                n @ Expr::Add(_) => {
                    let mut den = BTreeMap::new();
                    den.insert(n, m);
                    Fraction { num: lifted, den }
                }
                n => Fraction::atom(Expr::mul([lifted, Expr::pow(n, *k)])),
            }
        }
        other => Fraction::atom(other.clone()),
    }
}

/// Power-product decomposition of one canonical term: numeric coefficient
/// and a map from factor key to integer exponent.
pub(crate) fn term_powers(term: &Expr) -> (Rational, BTreeMap<Expr, i64>) {
    let (c, rest) = term.split_coefficient();
    let mut powers = BTreeMap::new();
    if rest.is_one() {
        return (c, powers);
    }
    for f in rest.factors() {
        match f {
            Expr::Pow(b, k) => *powers.entry((*b).clone()).or_insert(0) += k,
            other => *powers.entry(other).or_insert(0) += 1,
        }
    }
    (c, powers)
}

/// Removes the common monomial content (shared atom powers and the rational
/// gcd of the coefficients) from an expanded expression, making the first
/// term's coefficient positive. Returns `(primitive, content)` with
/// `e == content * primitive`.
pub fn content_strip(e: &Expr) -> (Expr, Expr) {
    let terms = e.terms();
    if terms.is_empty() {
        return (Expr::zero(), Expr::one());
    }
    let decomposed: Vec<(Rational, BTreeMap<Expr, i64>)> = terms.iter().map(term_powers).collect();
    let mut mins: BTreeMap<Expr, i64> = BTreeMap::new();
    for (_, p) in &decomposed {
        for k in p.keys() {
            mins.entry(k.clone()).or_insert(0);
        }
    }
    for (key, min) in mins.iter_mut() {
        *min = decomposed
            .iter()
            .map(|(_, p)| p.get(key).copied().unwrap_or(0))
            .min()
            .unwrap_or(0);
    }
    let mut g = decomposed[0].0.clone();
    for (c, _) in &decomposed[1..] {
        g = rational_gcd(&g, c);
    }
    if g.is_zero() {
        g = Rational::one();
    }
    if decomposed[0].0.is_negative() {
        g = -g;
    }
    let content = Expr::mul(
        std::iter::once(Expr::Num(g.clone())).chain(
            mins.iter()
                .filter(|(_, &m)| m != 0)
                .map(|(b, &m)| Expr::pow(b.clone(), m)),
        ),
    );
    // Multiply term by term so that sum-valued keys merge with their
    // negative powers before any distribution happens.
    let mut inverse: Vec<Expr> = vec![Expr::Num(Rational::one() / g)];
    inverse.extend(
        mins.iter()
            .filter(|(_, &m)| m != 0)
            .map(|(b, &m)| Expr::Pow(std::sync::Arc::new(b.clone()), -m)),
    );
    let primitive = Expr::add(terms.into_iter().map(|t| {
        let mut fs = inverse.clone();
        fs.push(t);
        Expr::mul(fs)
    }));
    (primitive, content)
}
