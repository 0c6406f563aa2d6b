use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{BaseVar, Expr, FuncApp, JetVar};
use crate::error::{Error, Result};

/// A formal parameter of an opaque function symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formal {
    T,
    X,
    Y,
    U,
    V,
    W,
}

impl Formal {
    pub fn name(self) -> &'static str {
        match self {
            Formal::T => "t",
            Formal::X => "x",
            Formal::Y => "y",
            Formal::U => "u",
            Formal::V => "v",
            Formal::W => "w",
        }
    }

    pub fn from_name(name: &str) -> Option<Formal> {
        Some(match name {
            "t" => Formal::T,
            "x" => Formal::X,
            "y" => Formal::Y,
            "u" | "U" => Formal::U,
            "v" => Formal::V,
            "w" => Formal::W,
            _ => return None,
        })
    }

    /// The variable this parameter stands for when the function is applied
    /// to its own formal arguments.
    pub fn as_expr(self) -> Expr {
        match self {
            Formal::T => Expr::Var(BaseVar::T),
            Formal::X => Expr::Var(BaseVar::X),
            Formal::Y => Expr::Var(BaseVar::Y),
            Formal::U => Expr::Jet(JetVar::U),
            Formal::V => Expr::Var(BaseVar::V),
            Formal::W => Expr::Var(BaseVar::W),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FunctionSymbol {
    pub name: Arc<str>,
    pub params: Vec<Formal>,
}

impl FunctionSymbol {
    pub fn new(name: &str, params: &[Formal]) -> Arc<FunctionSymbol> {
        Arc::new(FunctionSymbol {
            name: Arc::from(name),
            params: params.to_vec(),
        })
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn slot_of(&self, p: Formal) -> Option<usize> {
        self.params.iter().position(|&q| q == p)
    }

    /// The application to the formal arguments, e.g. `f(x)`.
    pub fn apply_formal(self: &Arc<Self>) -> Expr {
        self.apply(self.params.iter().map(|p| p.as_expr()).collect())
    }

    pub fn apply(self: &Arc<Self>, args: Vec<Expr>) -> Expr {
        let n = args.len();
        Expr::Func(Arc::new(FuncApp {
            sym: self.clone(),
            args,
            deriv: vec![0; n],
        }))
    }

    /// Application to the formal arguments with the given derivative counts.
    pub fn derivative(self: &Arc<Self>, deriv: Vec<u32>) -> Expr {
        Expr::Func(Arc::new(FuncApp {
            sym: self.clone(),
            args: self.params.iter().map(|p| p.as_expr()).collect(),
            deriv,
        }))
    }

    /// Shorthand: derivative with respect to the listed formal parameters.
    pub fn derivative_wrt(self: &Arc<Self>, wrt: &[Formal]) -> Expr {
        let mut deriv = vec![0; self.arity()];
        for p in wrt {
            let slot = self
                .slot_of(*p)
                .expect("derivative index must reference a formal argument");
            deriv[slot] += 1;
        }
        self.derivative(deriv)
    }
}

/// Declared function symbols and symbolic constants.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    functions: BTreeMap<String, Arc<FunctionSymbol>>,
    constants: BTreeSet<String>,
}

const RESERVED: &[&str] = &[
    "t", "x", "y", "v", "w", "u", "U", "exp", "log", "sin", "cos", "pow", "D",
];

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn declare_function(&mut self, name: &str, params: &[Formal]) -> Result<Arc<FunctionSymbol>> {
        check_name(name)?;
        if self.constants.contains(name) {
            return Err(Error::Symbol(format!("'{name}' already declared as a constant")));
        }
        let mut seen = BTreeSet::new();
        if params.iter().any(|p| !seen.insert(*p)) {
            return Err(Error::Symbol(format!("duplicate formal argument in '{name}'")));
        }
        let sym = FunctionSymbol::new(name, params);
        if let Some(prev) = self.functions.get(name) {
            if prev.params != sym.params {
                return Err(Error::Symbol(format!("'{name}' redeclared with a different signature")));
            }
            return Ok(prev.clone());
        }
        self.functions.insert(name.to_string(), sym.clone());
        Ok(sym)
    }

    pub fn declare_constant(&mut self, name: &str) -> Result<()> {
        check_name(name)?;
        if self.functions.contains_key(name) {
            return Err(Error::Symbol(format!("'{name}' already declared as a function")));
        }
        self.constants.insert(name.to_string());
        Ok(())
    }

    pub fn with_function(mut self, name: &str, params: &[Formal]) -> Self {
        self.declare_function(name, params).expect("valid declaration");
        self
    }

    pub fn with_constants(mut self, names: &[&str]) -> Self {
        for n in names {
            self.declare_constant(n).expect("valid declaration");
        }
        self
    }

    pub fn function(&self, name: &str) -> Option<&Arc<FunctionSymbol>> {
        self.functions.get(name)
    }

    pub fn has_constant(&self, name: &str) -> bool {
        self.constants.contains(name)
    }

    pub fn functions(&self) -> impl Iterator<Item = &Arc<FunctionSymbol>> {
        self.functions.values()
    }

    pub fn constants(&self) -> impl Iterator<Item = &str> {
        self.constants.iter().map(String::as_str)
    }

    /// Checks that every constant and function symbol in `e` is declared
    /// here with a matching signature.
    pub fn check_declared(&self, e: &Expr) -> Result<()> {
        let mut err = None;
        e.walk(&mut |node| {
            if err.is_some() {
                return;
            }
            match node {
                Expr::Const(c) if !self.constants.contains(&**c) => {
                    err = Some(Error::Symbol(format!("undeclared symbol '{c}'")));
                }
                Expr::Func(app) => match self.functions.get(&*app.sym.name) {
                    Some(s) if s.params == app.sym.params => {}
                    _ => err = Some(Error::Symbol(format!("undeclared symbol '{}'", app.sym.name))),
                },
                _ => {}
            }
        });
        err.map_or(Ok(()), Err)
    }
}

fn check_name(name: &str) -> Result<()> {
    let mut chars = name.chars();
    let ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric());
    if !ok || RESERVED.contains(&name) {
        return Err(Error::Symbol(format!("invalid or reserved symbol name '{name}'")));
    }
    Ok(())
}
