//! Jet-space symbolic calculus for conservation laws, point symmetries and
//! similarity reductions of scalar evolution equations in (t, x, y).

pub mod conservation;
pub mod error;
pub mod expr;
pub mod jet;
pub mod numeric;
pub mod parse;
pub mod print;
pub mod problem;
pub mod reduction;
pub mod report;
pub mod symmetry;

pub use error::{Error, Result};
pub use expr::{BaseVar, Expr, Formal, FuncApp, FunctionSymbol, JetVar, Rational, SymbolTable};
pub use parse::{parse, ParseError, ParseErrorKind, SourceSpan};
pub use print::print_canonical;
