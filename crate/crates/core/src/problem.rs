//! JSON problem files: an equation plus the declared symbols and the optional
//! multiplier, fluxes, operator, ansatz, solution and expected results.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conservation::ConservedVector;
use crate::error::{Error, Result};
use crate::expr::{Expr, Formal, FunctionSymbol, SymbolTable};
use crate::jet::VectorField;
use crate::parse::parse;
use crate::reduction::{Ansatz, ReducedEquation};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionDecl {
    pub name: String,
    pub args: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    pub t: String,
    pub x: String,
    pub y: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub tau: String,
    pub xi: String,
    pub eta: String,
    pub phi: String,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzSpec {
    pub v: String,
    pub w: String,
    pub u: String,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSpec {
    /// Euler operator applied to `multiplier · equation`.
    #[serde(default)]
    pub euler: Option<String>,
    /// Equations that must appear in the generated determining system.
    #[serde(default)]
    pub determining: Vec<String>,
    /// Coefficients of the operator in the equation's symmetry basis.
    #[serde(default)]
    pub decomposition: Option<Vec<String>>,
    /// Reduced equation in `H(v, w)`.
    #[serde(default)]
    pub reduced: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub u0: String,
    pub f: String,
    pub g: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
}

/// Raw problem file as read from JSON.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default)]
    pub name: Option<String>,
    pub equation: String,
    pub dependent: String,
    pub independent: Vec<String>,
    #[serde(default)]
    pub functions: Vec<FunctionDecl>,
    #[serde(default)]
    pub constants: Vec<String>,
    #[serde(default)]
    pub multiplier: Option<String>,
    /// Name of the unknown multiplier function in the determining system.
    #[serde(default)]
    pub unknown: Option<String>,
    #[serde(default)]
    pub fluxes: Option<FluxSpec>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub ansatz: Option<AnsatzSpec>,
    #[serde(default)]
    pub solution: Option<String>,
    #[serde(default)]
    pub expected: Option<ExpectedSpec>,
    #[serde(default)]
    pub simulation: Option<SimulationSpec>,
}

#[derive(Clone, Debug, Default)]
pub struct Expected {
    pub euler: Option<Expr>,
    pub determining: Vec<Expr>,
    pub decomposition: Option<Vec<Expr>>,
    pub reduced: Option<ReducedEquation>,
}

#[derive(Clone, Debug)]
pub struct Simulation {
    pub u0: Expr,
    pub f: Expr,
    pub g: Expr,
    pub n: usize,
    pub t_end: f64,
}

/// A parsed problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub name: Option<String>,
    pub symbols: SymbolTable,
    pub equation: Expr,
    pub multiplier: Option<Expr>,
    pub unknown: Option<Arc<FunctionSymbol>>,
    pub fluxes: Option<ConservedVector>,
    pub operator: Option<VectorField>,
    pub ansatz: Option<Ansatz>,
    pub solution: Option<Expr>,
    pub expected: Expected,
    pub simulation: Option<Simulation>,
}

fn field_err(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Problem(format!("field '{field}': {e}"))
}

fn expr(field: &str, text: &str, symbols: &SymbolTable) -> Result<Expr> {
    parse(text, symbols).map_err(|e| field_err(field, e))
}

fn opt_expr(field: &str, text: &Option<String>, symbols: &SymbolTable) -> Result<Option<Expr>> {
    text.as_deref().map(|t| expr(field, t, symbols)).transpose()
}

impl Problem {
    pub fn from_json(text: &str) -> Result<Problem> {
        let file: ProblemFile = serde_json::from_str(text).map_err(|e| Error::Problem(e.to_string()))?;
        Problem::from_file(&file)
    }

    pub fn load(path: &Path) -> Result<Problem> {
        let text = std::fs::read_to_string(path)?;
        Problem::from_json(&text)
    }

    pub fn from_file(file: &ProblemFile) -> Result<Problem> {
        if file.dependent != "u" {
            return Err(field_err("dependent", format!("expected \"u\", found \"{}\"", file.dependent)));
        }
        if file.independent != ["t", "x", "y"] {
            return Err(field_err("independent", "expected [\"t\", \"x\", \"y\"]"));
        }
        let mut symbols = SymbolTable::new();
        for c in &file.constants {
            symbols.declare_constant(c).map_err(|e| field_err("constants", e))?;
        }
        for f in &file.functions {
            let params = f
                .args
                .iter()
                .map(|a| Formal::from_name(a).ok_or_else(|| field_err("functions", format!("unknown argument '{a}' of '{}'", f.name))))
                .collect::<Result<Vec<_>>>()?;
            symbols.declare_function(&f.name, &params).map_err(|e| field_err("functions", e))?;
        }
        let equation = expr("equation", &file.equation, &symbols)?;
        let multiplier = opt_expr("multiplier", &file.multiplier, &symbols)?;
        let unknown = match &file.unknown {
            Some(n) => Some(
                symbols
                    .function(n)
                    .cloned()
                    .ok_or_else(|| field_err("unknown", format!("'{n}' is not a declared function")))?,
            ),
            None => None,
        };
        let fluxes = match &file.fluxes {
            Some(p) => Some(
                ConservedVector::new(
                    expr("fluxes.t", &p.t, &symbols)?,
                    expr("fluxes.x", &p.x, &symbols)?,
                    expr("fluxes.y", &p.y, &symbols)?,
                )
                .map_err(|e| field_err("fluxes", e))?,
            ),
            None => None,
        };
        let operator = match &file.operator {
            Some(o) => Some(
                VectorField::new(
                    expr("operator.tau", &o.tau, &symbols)?,
                    expr("operator.xi", &o.xi, &symbols)?,
                    expr("operator.eta", &o.eta, &symbols)?,
                    expr("operator.phi", &o.phi, &symbols)?,
                )
                .map_err(|e| field_err("operator", e))?,
            ),
            None => None,
        };
        let ansatz = match &file.ansatz {
            Some(a) => Some(
                Ansatz::new(
                    expr("ansatz.v", &a.v, &symbols)?,
                    expr("ansatz.w", &a.w, &symbols)?,
                    expr("ansatz.u", &a.u, &symbols)?,
                )
                .map_err(|e| field_err("ansatz", e))?,
            ),
            None => None,
        };
        let solution = opt_expr("solution", &file.solution, &symbols)?;
        let spec = file.expected.clone().unwrap_or_default();
        let reduced = match &spec.reduced {
            Some(text) => {
                let a = ansatz.as_ref().ok_or_else(|| field_err("expected.reduced", "requires an ansatz"))?;
                let e = expr("expected.reduced", text, &symbols)?;
                Some(ReducedEquation::new(e, a.h.clone()).map_err(|e| field_err("expected.reduced", e))?)
            }
            None => None,
        };
        let expected = Expected {
            euler: opt_expr("expected.euler", &spec.euler, &symbols)?,
            determining: spec
                .determining
                .iter()
                .map(|t| expr("expected.determining", t, &symbols))
                .collect::<Result<_>>()?,
            decomposition: spec
                .decomposition
                .as_ref()
                .map(|cs| cs.iter().map(|t| expr("expected.decomposition", t, &symbols)).collect::<Result<Vec<_>>>())
                .transpose()?,
            reduced,
        };
        let simulation = match &file.simulation {
            Some(s) => Some(Simulation {
                u0: expr("simulation.u0", &s.u0, &symbols)?,
                f: expr("simulation.f", &s.f, &symbols)?,
                g: expr("simulation.g", &s.g, &symbols)?,
                n: s.n,
                t_end: s.t_end,
            }),
            None => None,
        };
        Ok(Problem {
            name: file.name.clone(),
            symbols,
            equation,
            multiplier,
            unknown,
            fluxes,
            operator,
            ansatz,
            solution,
            expected,
            simulation,
        })
    }
}
