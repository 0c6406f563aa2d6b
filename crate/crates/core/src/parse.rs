//! Recursive-descent parser for the expression grammar.
//!
//! ```text
//! expr  := term (("+" | "-") term)*
//! term  := unary (("*" | "/") unary)*
//! unary := "-" unary | pow
//! pow   := atom ("^" exponent)?
//! exponent := integer | "-" integer | "(" ["-"] integer ["/" integer] ")"
//! builtins: exp, log, sin, cos (unary), pow(base, exponent)
//! atom  := number | name | name "(" args ")" | name "'"+ "(" args ")"
//!        | "D(" call ("," formal)+ ")" | "pow(" expr "," expr ")"
//!        | jet | "(" expr ")"
//! ```

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::expr::{Expr, Formal, FuncApp, JetVar, Rational, SymbolTable};

/// Byte offsets `[start, end)` into the parsed text.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        SourceSpan { start, end }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    UndeclaredSymbol,
    BadDerivativeIndex,
    ExponentNotRational,
    Arity,
    UnexpectedToken,
    UnexpectedEnd,
    InvalidNumber,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}..{}", self.message, self.span.start, self.span.end)
    }
}

impl std::error::Error for ParseError {}

type PResult<T> = Result<T, ParseError>;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(String),
    Name(String),
    Underscore,
    Prime,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

fn lex(text: &str) -> PResult<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            Tok::Num(text[start..i].to_string())
        } else if c.is_ascii_alphabetic() {
            while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                i += 1;
            }
            Tok::Name(text[start..i].to_string())
        } else {
            i += 1;
            match c {
                b'_' => Tok::Underscore,
                b'\'' => Tok::Prime,
                b'+' => Tok::Plus,
                b'-' => Tok::Minus,
                b'*' => Tok::Star,
                b'/' => Tok::Slash,
                b'^' => Tok::Caret,
                b'(' => Tok::LParen,
                b')' => Tok::RParen,
                b',' => Tok::Comma,
                _ => {
                    let end = start + text[start..].chars().next().map_or(1, char::len_utf8);
                    return Err(ParseError {
                        kind: ParseErrorKind::UnexpectedToken,
                        span: SourceSpan::new(start, end),
                        message: format!("unexpected character '{}'", &text[start..end]),
                    });
                }
            }
        };
        out.push(Token { tok, span: SourceSpan::new(start, i) });
    }
    out.push(Token { tok: Tok::End, span: SourceSpan::new(text.len(), text.len()) });
    Ok(out)
}

/// Parses `text` into a canonical expression using the declared symbols.
pub fn parse(text: &str, symbols: &SymbolTable) -> PResult<Expr> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, symbols };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        _ => Err(p.unexpected()),
    }
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    symbols: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self) -> ParseError {
        let t = &self.tokens[self.pos];
        match t.tok {
            Tok::End => ParseError {
                kind: ParseErrorKind::UnexpectedEnd,
                span: t.span,
                message: "unexpected end of input".into(),
            },
            _ => ParseError {
                kind: ParseErrorKind::UnexpectedToken,
                span: t.span,
                message: "unexpected token".into(),
            },
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected())
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    terms.push(self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    terms.push(self.term()?.neg());
                }
                _ => break,
            }
        }
        Ok(Expr::add(terms))
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = Expr::mul([acc, rhs]);
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    acc = Expr::mul([acc, Expr::pow(rhs, -1)]);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Tok::Minus => {
                self.bump();
                Ok(self.unary()?.neg())
            }
            _ => self.pow(),
        }
    }

    fn pow(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let r = self.exponent()?;
        Ok(Expr::rpow(base, Expr::Num(r)))
    }

    fn exponent(&mut self) -> PResult<Rational> {
        let start = self.span().start;
        let parenthesized = *self.peek() == Tok::LParen;
        if parenthesized {
            self.bump();
        }
        let negative = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let mut value = self.integer_literal(start)?;
        if parenthesized {
            if *self.peek() == Tok::Slash {
                self.bump();
                let den = self.integer_literal(start)?;
                if den.is_zero() {
                    return Err(ParseError {
                        kind: ParseErrorKind::InvalidNumber,
                        span: SourceSpan::new(start, self.span().start),
                        message: "zero denominator in exponent".into(),
                    });
                }
                value /= den;
            }
            if *self.peek() != Tok::RParen {
                return Err(self.not_rational(start));
            }
            self.bump();
        }
        Ok(if negative { -value } else { value })
    }

    fn integer_literal(&mut self, start: usize) -> PResult<Rational> {
        match self.peek().clone() {
            Tok::Num(s) if s.bytes().all(|b| b.is_ascii_digit()) => {
                self.bump();
                let n: BigInt = s.parse().expect("digits");
                Ok(Rational::from_integer(n))
            }
            _ => Err(self.not_rational(start)),
        }
    }

    fn not_rational(&self, start: usize) -> ParseError {
        // Extend the span to the end of the offending operand.
        let mut end = self.span().end;
        let mut depth = 0i32;
        for t in &self.tokens[self.pos..] {
            match t.tok {
                Tok::LParen => depth += 1,
                Tok::RParen if depth > 0 => depth -= 1,
                Tok::End => break,
                _ => {}
            }
            end = t.span.end;
            if depth == 0 {
                break;
            }
        }
        ParseError {
            kind: ParseErrorKind::ExponentNotRational,
            span: SourceSpan::new(start, end.max(start)),
            message: "exponent must be rational".into(),
        }
    }

    fn atom(&mut self) -> PResult<Expr> {
        let tok = self.bump();
        match tok.tok {
            Tok::Num(s) => parse_number(&s).ok_or(ParseError {
                kind: ParseErrorKind::InvalidNumber,
                span: tok.span,
                message: format!("invalid number '{s}'"),
            }),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Name(name) => self.named(name, tok.span),
            _ => {
                self.pos -= 1;
                Err(self.unexpected())
            }
        }
    }

    fn named(&mut self, name: String, span: SourceSpan) -> PResult<Expr> {
        if (name == "u" || name == "U") && *self.peek() == Tok::Underscore {
            return self.jet_suffix();
        }
        let mut primes = 0u32;
        while *self.peek() == Tok::Prime {
            self.bump();
            primes += 1;
        }
        if primes > 0 || *self.peek() == Tok::LParen {
            return self.call(&name, span, primes);
        }
        if let Some(v) = crate::expr::BaseVar::from_name(&name) {
            return Ok(Expr::Var(v));
        }
        if name == "u" || name == "U" {
            return Ok(Expr::u());
        }
        if self.symbols.has_constant(&name) {
            return Ok(Expr::konst(&name));
        }
        if self.symbols.function(&name).is_some() {
            return Err(ParseError {
                kind: ParseErrorKind::Arity,
                span,
                message: format!("function '{name}' requires an argument list"),
            });
        }
        Err(undeclared(&name, span))
    }

    fn jet_suffix(&mut self) -> PResult<Expr> {
        let underscore = self.bump().span;
        let (letters, span) = match self.peek().clone() {
            Tok::Name(s) if self.span().start == underscore.end => {
                let sp = self.span();
                self.bump();
                (s, sp)
            }
            _ => {
                return Err(ParseError {
                    kind: ParseErrorKind::BadDerivativeIndex,
                    span: underscore,
                    message: "bad derivative index: empty jet suffix".into(),
                })
            }
        };
        let mut idx = [0u8; 3];
        for (k, c) in letters.char_indices() {
            let slot = match c {
                't' => 0,
                'x' => 1,
                'y' => 2,
                _ => {
                    let at = span.start + k;
                    return Err(ParseError {
                        kind: ParseErrorKind::BadDerivativeIndex,
                        span: SourceSpan::new(at, at + c.len_utf8()),
                        message: format!("bad derivative index '{c}'"),
                    });
                }
            };
            idx[slot] = idx[slot].checked_add(1).ok_or(ParseError {
                kind: ParseErrorKind::BadDerivativeIndex,
                span,
                message: "bad derivative index: order too large".into(),
            })?;
        }
        Ok(Expr::Jet(JetVar::new(idx[0], idx[1], idx[2])))
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn call(&mut self, name: &str, span: SourceSpan, primes: u32) -> PResult<Expr> {
        if primes == 0 {
            match name {
                "exp" | "log" | "sin" | "cos" => {
                    let open = self.span().start;
                    let args = self.args()?;
                    let end = self.tokens[self.pos - 1].span.end;
                    let [a] = <[Expr; 1]>::try_from(args).map_err(|_| arity(name, 1, SourceSpan::new(open, end)))?;
                    return Ok(match name {
                        "exp" => Expr::exp(a),
                        "log" => Expr::log(a),
                        "sin" => Expr::sin(a),
                        _ => Expr::cos(a),
                    });
                }
                "pow" => {
                    let open = self.span().start;
                    let args = self.args()?;
                    let end = self.tokens[self.pos - 1].span.end;
                    let [b, e] = <[Expr; 2]>::try_from(args).map_err(|_| arity(name, 2, SourceSpan::new(open, end)))?;
                    return Ok(Expr::rpow(b, e));
                }
                "D" => return self.derivative(span),
                _ => {}
            }
        }
        let sym = self.symbols.function(name).cloned().ok_or_else(|| undeclared(name, span))?;
        let open = self.span().start;
        let args = self.args()?;
        let close = self.tokens[self.pos - 1].span.end;
        if args.len() != sym.arity() {
            return Err(arity(name, sym.arity(), SourceSpan::new(open, close)));
        }
        let mut deriv = vec![0u32; sym.arity()];
        if primes > 0 {
            if sym.arity() != 1 {
                return Err(ParseError {
                    kind: ParseErrorKind::BadDerivativeIndex,
                    span,
                    message: format!("prime shorthand needs a unary function, '{name}' has arity {}", sym.arity()),
                });
            }
            deriv[0] = primes;
        }
        Ok(Expr::func(FuncApp { sym, args, deriv }))
    }

    fn derivative(&mut self, span: SourceSpan) -> PResult<Expr> {
        self.expect(Tok::LParen)?;
        let inner_start = self.span().start;
        let inner = self.expr()?;
        let inner_span = SourceSpan::new(inner_start, self.tokens[self.pos - 1].span.end);
        let Expr::Func(app) = inner else {
            return Err(ParseError {
                kind: ParseErrorKind::BadDerivativeIndex,
                span: inner_span,
                message: "D(...) expects a function application as its first argument".into(),
            });
        };
        let mut app = (*app).clone();
        let mut count = 0;
        while *self.peek() == Tok::Comma {
            self.bump();
            let t = self.bump();
            let slot = match &t.tok {
                Tok::Name(n) => Formal::from_name(n).and_then(|p| app.sym.slot_of(p)),
                _ => None,
            };
            let Some(slot) = slot else {
                return Err(ParseError {
                    kind: ParseErrorKind::BadDerivativeIndex,
                    span: t.span,
                    message: format!("bad derivative index: not a formal argument of '{}'", app.sym.name),
                });
            };
            app.deriv[slot] += 1;
            count += 1;
        }
        let close = self.expect(Tok::RParen)?;
        if count == 0 {
            return Err(ParseError {
                kind: ParseErrorKind::BadDerivativeIndex,
                span: SourceSpan::new(span.start, close.end),
                message: "bad derivative index: D(...) needs at least one variable".into(),
            });
        }
        Ok(Expr::func(app))
    }
}

fn undeclared(name: &str, span: SourceSpan) -> ParseError {
    ParseError {
        kind: ParseErrorKind::UndeclaredSymbol,
        span,
        message: format!("undeclared symbol '{name}'"),
    }
}

fn arity(name: &str, n: usize, span: SourceSpan) -> ParseError {
    ParseError {
        kind: ParseErrorKind::Arity,
        span,
        message: format!("'{name}' takes {n} argument(s)"),
    }
}

fn parse_number(s: &str) -> Option<Expr> {
    let (int, frac) = match s.split_once('.') {
        Some((a, b)) => (a, b),
        None => (s, ""),
    };
    if frac.contains('.') || (int.is_empty() && frac.is_empty()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let n: BigInt = digits.parse().ok()?;
    let mut den = Rational::one();
    let ten = Rational::from_integer(BigInt::from(10));
    for _ in 0..frac.len() {
        den *= &ten;
    }
    Some(Expr::Num(Rational::from_integer(n) / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::print::print_canonical;

    fn table() -> SymbolTable {
        SymbolTable::new()
            .with_function("f", &[Formal::X])
            .with_function("g", &[Formal::Y])
            .with_function("H", &[Formal::V, Formal::W])
            .with_constants(&["a", "m2"])
    }

    fn p(s: &str) -> Expr {
        parse(s, &table()).unwrap()
    }

    #[test]
    fn ricci_operator() {
        let e = p("u_t - u_xy/u + u_x*u_y/u^2");
        assert_eq!(print_canonical(&e), "u_t - u_xy*u^-1 + u_x*u_y*u^-2");
    }

    #[test]
    fn declared_functions() {
        let e = p("f(x)+g(y)");
        assert_eq!(print_canonical(&e), "f(x) + g(y)");
    }

    #[test]
    fn empty_jet_suffix() {
        let err = parse("u_", &table()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::BadDerivativeIndex);
        assert_eq!(err.span, SourceSpan::new(1, 2));
    }

    #[test]
    fn bad_jet_letter() {
        let err = parse("u_xz", &table()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::BadDerivativeIndex);
        assert_eq!(err.span, SourceSpan::new(3, 4));
    }

    #[test]
    fn undeclared_symbol_span() {
        let err = parse("x + k(y)", &table()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UndeclaredSymbol);
        assert_eq!(err.span, SourceSpan::new(4, 5));
    }

    #[test]
    fn symbolic_exponent_rejected() {
        let err = parse("x^y", &table()).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::ExponentNotRational);
        assert_eq!(err.span, SourceSpan::new(2, 3));
    }

    #[test]
    fn jet_letters_sorted() {
        assert_eq!(p("u_yx"), p("u_xy"));
        assert_eq!(p("U_yx"), Expr::jet(0, 1, 1));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(p("-x^2"), Expr::pow(Expr::x(), 2).neg());
    }

    #[test]
    fn rational_exponents() {
        let e = p("(-2*(y+m2))^(-1/2)");
        assert_eq!(parse(&print_canonical(&e), &table()).unwrap(), e);
    }

    #[test]
    fn derivative_forms_round_trip() {
        for s in ["f'(x)", "f''(x)", "D(f(x), x, x, x)", "D(H(v, w), v, w)", "pow(x, a)", "exp(a*t)*log(x)", "2 + 1/2*sin(x)*cos(y)"] {
            let e = p(s);
            assert_eq!(p(&print_canonical(&e)), e, "{s}");
        }
        assert_eq!(p("D(f(x), x)"), p("f'(x)"));
    }

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(p("0.25"), Expr::rational(1, 4));
    }
}
