//! Deterministic text form. Output re-parses to the same canonical tree.

use std::fmt::Write;

use num_traits::{One, Signed};

use crate::expr::{Expr, FuncApp, Rational};

pub fn print_canonical(e: &Expr) -> String {
    let mut out = String::new();
    write_sum(&mut out, e);
    out
}

fn write_sum(out: &mut String, e: &Expr) {
    let terms = match e {
        Expr::Add(ts) => ts.to_vec(),
        other => vec![other.clone()],
    };
    for (i, t) in terms.iter().enumerate() {
        let (c, rest) = t.split_coefficient();
        let negative = c.is_negative();
        let mag = c.abs();
        if i == 0 {
            if negative {
                out.push('-');
            }
        } else {
            out.push_str(if negative { " - " } else { " + " });
        }
        if rest.is_one() {
            write_rational(out, &mag);
            continue;
        }
        if !mag.is_one() {
            write_rational(out, &mag);
            out.push('*');
        }
        write_product(out, &rest);
    }
}

fn write_product(out: &mut String, e: &Expr) {
    match e {
        Expr::Mul(fs) => {
            for (i, f) in fs.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                }
                write_factor(out, f);
            }
        }
        other => write_factor(out, other),
    }
}

fn write_factor(out: &mut String, e: &Expr) {
    match e {
        Expr::Add(_) | Expr::Mul(_) => {
            out.push('(');
            write_sum(out, e);
            out.push(')');
        }
        Expr::Num(r) if r.is_negative() || !r.is_integer() => {
            out.push('(');
            write_rational(out, r);
            out.push(')');
        }
        other => write_atom(out, other),
    }
}

fn write_base(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(r) if r.is_integer() && !r.is_negative() => write_rational(out, r),
        Expr::Num(_) | Expr::Add(_) | Expr::Mul(_) | Expr::Pow(..) | Expr::RPow(..) => {
            out.push('(');
            write_sum(out, e);
            out.push(')');
        }
        other => write_atom(out, other),
    }
}

fn write_atom(out: &mut String, e: &Expr) {
    match e {
        Expr::Num(r) => write_rational(out, r),
        Expr::Const(c) => out.push_str(c),
        Expr::Var(v) => out.push_str(v.name()),
        Expr::Jet(j) => {
            out.push('u');
            let s = j.suffix();
            if !s.is_empty() {
                out.push('_');
                out.push_str(&s);
            }
        }
        Expr::Func(app) => write_func(out, app),
        Expr::Exp(a) => {
            out.push_str("exp(");
            write_sum(out, a);
            out.push(')');
        }
        Expr::Log(a) | Expr::Sin(a) | Expr::Cos(a) => {
            out.push_str(match e {
                Expr::Log(_) => "log(",
                Expr::Sin(_) => "sin(",
                _ => "cos(",
            });
            write_sum(out, a);
            out.push(')');
        }
        Expr::Pow(b, k) => {
            write_base(out, b);
            let _ = write!(out, "^{k}");
        }
        Expr::RPow(b, x) => match x.as_rational() {
            Some(r) => {
                write_base(out, b);
                out.push_str("^(");
                write_rational(out, r);
                out.push(')');
            }
            None => {
                out.push_str("pow(");
                write_sum(out, b);
                out.push_str(", ");
                write_sum(out, x);
                out.push(')');
            }
        },
        Expr::Add(_) | Expr::Mul(_) => {
            out.push('(');
            write_sum(out, e);
            out.push(')');
        }
    }
}

fn write_args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_sum(out, a);
    }
    out.push(')');
}

fn write_func(out: &mut String, app: &FuncApp) {
    let order: u32 = app.deriv.iter().sum();
    if order == 0 {
        out.push_str(&app.sym.name);
        write_args(out, &app.args);
        return;
    }
    if app.args.len() == 1 && order <= 2 {
        out.push_str(&app.sym.name);
        for _ in 0..order {
            out.push('\'');
        }
        write_args(out, &app.args);
        return;
    }
    out.push_str("D(");
    out.push_str(&app.sym.name);
    write_args(out, &app.args);
    for (slot, &n) in app.deriv.iter().enumerate() {
        for _ in 0..n {
            out.push_str(", ");
            out.push_str(app.sym.params[slot].name());
        }
    }
    out.push(')');
}

fn write_rational(out: &mut String, r: &Rational) {
    if r.is_integer() {
        let _ = write!(out, "{}", r.numer());
    } else {
        let _ = write!(out, "{}/{}", r.numer(), r.denom());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_prints_as_zero() {
        assert_eq!(print_canonical(&Expr::zero()), "0");
    }

    #[test]
    fn ricci_operator_spelling() {
        let u = Expr::u();
        let (ux, uy, uxy) = (Expr::jet(0, 1, 0), Expr::jet(0, 0, 1), Expr::jet(0, 1, 1));
        let delta = Expr::jet(1, 0, 0) - &uxy / &u + &ux * &uy / Expr::pow(u.clone(), 2);
        assert_eq!(print_canonical(&delta), "u_t - u_xy*u^-1 + u_x*u_y*u^-2");
    }

    #[test]
    fn fractional_power_spelling() {
        let e = Expr::rpow(Expr::x() + Expr::y(), Expr::rational(-1, 2));
        assert_eq!(print_canonical(&e), "(x + y)^-1*(x + y)^(1/2)");
    }
}
