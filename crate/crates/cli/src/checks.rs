//! One runner per subcommand, each turning a problem into a [`Report`].

use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use jetcas::conservation::{
    construct_fluxes, multiplier_determining_system, on_shell_divergence, reduce_determining_system,
    verify_divergence_identity, DeterminingSystem,
};
use jetcas::jet::{euler_operator, invariance_residual};
use jetcas::numeric::{simulate_ricci, RicciReport, SamplePlan};
use jetcas::problem::{Problem, Simulation};
use jetcas::reduction::{equivalent_up_to_factor, numeric_agreement, reduce_by_ansatz, verify_solution, Equivalence};
use jetcas::report::{symbolic_zero, ResidualReport};
use jetcas::symmetry::{conslaw_symmetry_residual, decompose_in_basis, generate_link_determining_system, ricci_basis};
use jetcas::{BaseVar, Expr, Formal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::report::{Report, Status};

/// Sample points for comparing a reduced equation with the expected one.
pub const AGREEMENT_POINTS: usize = 50;
/// Largest relative drift of the conserved functional accepted by `simulate`.
pub const DRIFT_LIMIT: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    Euler,
    Multipliers,
    Fluxes,
    CheckDivergence,
    CheckSymmetry,
    CheckInvariance,
    DeterminingSystem,
    Decompose,
    Reduce,
    VerifySolution,
    Simulate,
}

impl Check {
    pub fn name(self) -> &'static str {
        match self {
            Check::Euler => "euler",
            Check::Multipliers => "multipliers",
            Check::Fluxes => "fluxes",
            Check::CheckDivergence => "check-divergence",
            Check::CheckSymmetry => "check-symmetry",
            Check::CheckInvariance => "check-invariance",
            Check::DeterminingSystem => "determining-system",
            Check::Decompose => "decompose",
            Check::Reduce => "reduce",
            Check::VerifySolution => "verify-solution",
            Check::Simulate => "simulate",
        }
    }
}

/// Runs `check` on `problem`, turning errors into failed reports.
pub fn run(check: Check, problem: &Problem, plan: &SamplePlan) -> Report {
    let case = problem.name.as_deref().unwrap_or("input");
    let start = Instant::now();
    let mut report = Report::new(case, check.name(), plan.seed);
    let outcome = match check {
        Check::Euler => euler(problem, plan, &mut report),
        Check::Multipliers => multipliers(problem, plan, &mut report),
        Check::Fluxes => fluxes(problem, plan, &mut report),
        Check::CheckDivergence => divergence(problem, plan, &mut report),
        Check::CheckSymmetry => symmetry(problem, plan, &mut report),
        Check::CheckInvariance => invariance(problem, plan, &mut report),
        Check::DeterminingSystem => determining(problem, &mut report),
        Check::Decompose => decompose(problem, &mut report),
        Check::Reduce => reduce(problem, plan, &mut report),
        Check::VerifySolution => solution(problem, plan, &mut report),
        Check::Simulate => simulate(problem, &mut report).map(|_| ()),
    };
    if let Err(e) = outcome {
        report = Report::failed(case, check.name(), plan.seed, format!("{e:#}"));
    }
    report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

macro_rules! require {
    ($opt:expr, $what:literal) => {
        $opt.as_ref().ok_or_else(|| anyhow!(concat!("problem file has no ", $what)))?
    };
}

fn strings(es: &[Expr]) -> Vec<String> {
    es.iter().map(Expr::to_string).collect()
}

fn euler(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let lambda = require!(p.multiplier, "multiplier");
    let e = euler_operator(&(lambda * &p.equation))?;
    r.details = json!({ "euler": e.to_string() });
    if let Some(want) = &p.expected.euler {
        r.details["expected"] = json!(want.to_string());
        r.absorb(&ResidualReport::evaluate(&e - want, plan));
    }
    Ok(())
}

/// Matches expected equations against generated ones up to sign.
fn match_equations(system: &DeterminingSystem, expected: &[Expr], exact: bool, r: &mut Report) {
    let coeffs = system.coefficients();
    let mut used = vec![false; coeffs.len()];
    let mut missing = Vec::new();
    for want in expected {
        let hit = coeffs
            .iter()
            .enumerate()
            .find(|(i, c)| !used[*i] && (symbolic_zero(&(*c - want)) || symbolic_zero(&(*c + want))));
        match hit {
            Some((i, _)) => used[i] = true,
            None => missing.push(want.to_string()),
        }
    }
    if !missing.is_empty() {
        r.status = r.status.and(Status::Fail);
        r.add_note(format!("expected equations not generated: {}", missing.join(", ")));
    }
    if exact && used.iter().any(|u| !u) {
        r.status = r.status.and(Status::Fail);
        let extra: Vec<String> = coeffs.iter().zip(&used).filter(|(_, u)| !**u).map(|(c, _)| c.to_string()).collect();
        r.add_note(format!("unexpected equations: {}", extra.join(", ")));
    }
}

fn system_json(system: &DeterminingSystem) -> Vec<String> {
    system
        .equations
        .iter()
        .zip(&system.provenance)
        .map(|(e, prov)| format!("{} = 0  [{prov}]", e.coefficient))
        .collect()
}

fn multipliers(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let unknown = match &p.unknown {
        Some(u) => u.clone(),
        None => {
            let mut symbols = p.symbols.clone();
            symbols.declare_function("Lambda", &[Formal::T, Formal::X, Formal::Y, Formal::U])?
        }
    };
    let full = multiplier_determining_system(&p.equation, &unknown)?;
    let system = reduce_determining_system(&full, &unknown);
    r.details = json!({ "system": system_json(&system) });
    if !p.expected.determining.is_empty() {
        match_equations(&system, &p.expected.determining, true, r);
    }
    if let Some(candidate) = &p.multiplier {
        let check = jetcas::conservation::verify_multiplier(&system, &unknown, candidate, &p.symbols, plan)?;
        for eq in &check.equations {
            r.absorb(&eq.report);
        }
        r.details["candidate"] = json!(candidate.to_string());
        if let Some(first) = &check.first_failure {
            r.details["first_failure"] = json!(first);
        }
    }
    Ok(())
}

/// Splits `f(x) + g(y)` into its x part and y part.
pub fn split_multiplier(lambda: &Expr) -> Result<(Expr, Expr)> {
    let (mut f, mut g) = (Vec::new(), Vec::new());
    for term in lambda.terms() {
        let has = |v| term.contains_var(v);
        if has(BaseVar::T) || !term.jet_vars().is_empty() || (has(BaseVar::X) && has(BaseVar::Y)) {
            bail!("multiplier is not of the form f(x) + g(y): {lambda}");
        }
        if has(BaseVar::Y) {
            g.push(term);
        } else {
            f.push(term);
        }
    }
    Ok((Expr::add(f), Expr::add(g)))
}

fn fluxes(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let lambda = require!(p.multiplier, "multiplier");
    let (f, g) = split_multiplier(lambda)?;
    let built = construct_fluxes(&f, &g)?;
    r.details = json!({ "fluxes": strings(&built.p) });
    r.absorb(&verify_divergence_identity(lambda, &p.equation, &built, plan));
    r.absorb(&ResidualReport::evaluate(on_shell_divergence(&p.equation, &built)?, plan));
    if let Some(given) = &p.fluxes {
        for (a, b) in built.p.iter().zip(&given.p) {
            r.absorb(&ResidualReport::evaluate(a - b, plan));
        }
    }
    Ok(())
}

fn divergence(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let lambda = require!(p.multiplier, "multiplier");
    let fl = require!(p.fluxes, "fluxes");
    let off = verify_divergence_identity(lambda, &p.equation, fl, plan);
    let on = ResidualReport::evaluate(on_shell_divergence(&p.equation, fl)?, plan);
    r.details = json!({ "off_shell": format!("{:?}", off.verdict).to_lowercase(), "on_shell": format!("{:?}", on.verdict).to_lowercase() });
    r.absorb(&off);
    r.absorb(&on);
    Ok(())
}

fn symmetry(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let v = require!(p.operator, "operator");
    let fl = require!(p.fluxes, "fluxes");
    let res = conslaw_symmetry_residual(v, fl)?;
    for rep in res.reports(plan) {
        r.absorb(&rep);
    }
    Ok(())
}

fn invariance(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let v = require!(p.operator, "operator");
    r.absorb(&ResidualReport::evaluate(invariance_residual(v, &p.equation)?, plan));
    Ok(())
}

fn determining(p: &Problem, r: &mut Report) -> Result<()> {
    let v = require!(p.operator, "operator");
    let fl = require!(p.fluxes, "fluxes");
    let system = generate_link_determining_system(fl, v)?;
    r.details = json!({ "system": system_json(&system) });
    match_equations(&system, &p.expected.determining, false, r);
    Ok(())
}

fn decompose(p: &Problem, r: &mut Report) -> Result<()> {
    let v = require!(p.operator, "operator");
    let d = decompose_in_basis(v, &ricci_basis())?;
    r.details = json!({ "coefficients": strings(&d.coefficients) });
    if let Some(want) = &p.expected.decomposition {
        if want.len() != d.coefficients.len() {
            bail!("expected {} coefficients, found {}", d.coefficients.len(), want.len());
        }
        let mut differing = Vec::new();
        for (i, (a, b)) in d.coefficients.iter().zip(want).enumerate() {
            let diff = a - b;
            if !symbolic_zero(&diff) {
                differing.push(format!("V{}: computed {a}, expected {b}", i + 1));
                r.residuals.push(diff.to_string());
            }
        }
        if !differing.is_empty() {
            r.status = Status::Fail;
            r.add_note(differing.join("; "));
        }
    }
    Ok(())
}

fn reduce(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let a = require!(p.ansatz, "ansatz");
    if let Some(v) = &p.operator {
        for inv in [&a.v, &a.w] {
            r.absorb(&jetcas::reduction::verify_invariant(v, inv, plan)?);
        }
    }
    let reduced = reduce_by_ansatz(&p.equation, a, plan)?;
    r.details = json!({ "reduced": reduced.expr.to_string() });
    if let Some(want) = &p.expected.reduced {
        let verdict = equivalent_up_to_factor(&reduced, want)?;
        let agreement = numeric_agreement(&reduced, want, plan, AGREEMENT_POINTS)?;
        r.details["expected"] = json!(want.expr.to_string());
        r.details["equivalence"] = serde_json::to_value(verdict)?;
        r.details["numeric_agreement"] = json!(agreement);
        r.record_numeric(agreement);
        if verdict != Equivalence::Equivalent {
            r.status = Status::Fail;
            r.add_note(format!("reduced equation differs from the expected one (relative disagreement {agreement:e})"));
        }
    }
    Ok(())
}

fn solution(p: &Problem, plan: &SamplePlan, r: &mut Report) -> Result<()> {
    let u = require!(p.solution, "solution");
    r.absorb(&verify_solution(&p.equation, u, plan)?);
    Ok(())
}

/// Default run: `u0 = 2 + sin x sin y / 2`, `f = sin x`, `g = cos y`, `N = 64`, `T = 0.5`.
pub fn default_simulation() -> Simulation {
    let s = |t: &str| jetcas::parse(t, &jetcas::SymbolTable::new()).expect("valid expression");
    Simulation { u0: s("2 + 0.5*sin(x)*sin(y)"), f: s("sin(x)"), g: s("cos(y)"), n: 64, t_end: 0.5 }
}

/// Integrates the problem's simulation block, or the default run.
pub fn simulate(p: &Problem, r: &mut Report) -> Result<RicciReport> {
    let default = default_simulation();
    let s = p.simulation.as_ref().unwrap_or(&default);
    let out = simulate_ricci(&s.u0, &s.f, &s.g, s.n, s.t_end)?;
    r.details = serde_json::to_value(&out.summary)?;
    r.record_numeric(out.summary.max_drift);
    if out.summary.aborted {
        r.status = Status::Fail;
        r.add_note("positivity lost");
    } else if out.summary.max_drift >= DRIFT_LIMIT {
        r.status = Status::Fail;
        r.add_note(format!("relative drift {:e} exceeds {DRIFT_LIMIT:e}", out.summary.max_drift));
    }
    Ok(out)
}
