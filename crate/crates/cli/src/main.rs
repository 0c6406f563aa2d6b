use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use jetcas::numeric::SamplePlan;
use jetcas::problem::Problem;
use jetcas_cli::checks::{self, Check};
use jetcas_cli::corpus::{selftest, Corpus};
use jetcas_cli::report::{Report, Status};

#[derive(Parser)]
#[command(name = "jetcas", version, about = "Symbolic workbench for conservation laws, symmetries and reductions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Problem file, or corpus directory for `selftest`.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Print reports as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Random sample points per numeric zero test.
    #[arg(long, global = true, default_value_t = 20)]
    trials: usize,
    /// Relative numeric zero threshold.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Output file; `simulate` writes its CSV time series here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Euler operator applied to multiplier times equation.
    Euler,
    /// Multiplier determining system and candidate check.
    Multipliers,
    /// Fluxes built from a multiplier f(x) + g(y).
    Fluxes,
    /// Divergence identity off and on shell.
    CheckDivergence,
    /// Link between the operator and the conserved vector.
    CheckSymmetry,
    /// Classical invariance of the equation under the operator.
    CheckInvariance,
    /// Determining system of the symmetry link.
    DeterminingSystem,
    /// Coefficients of the operator in the symmetry basis.
    Decompose,
    /// Similarity reduction by the ansatz.
    Reduce,
    /// Substitutes the solution into the equation.
    VerifySolution,
    /// Finite-difference integration tracking the conserved functional.
    Simulate,
    /// Runs the entire corpus against its manifest.
    Selftest,
}

impl Command {
    fn check(self) -> Option<Check> {
        Some(match self {
            Command::Euler => Check::Euler,
            Command::Multipliers => Check::Multipliers,
            Command::Fluxes => Check::Fluxes,
            Command::CheckDivergence => Check::CheckDivergence,
            Command::CheckSymmetry => Check::CheckSymmetry,
            Command::CheckInvariance => Check::CheckInvariance,
            Command::DeterminingSystem => Check::DeterminingSystem,
            Command::Decompose => Check::Decompose,
            Command::Reduce => Check::Reduce,
            Command::VerifySolution => Check::VerifySolution,
            Command::Simulate => Check::Simulate,
            Command::Selftest => return None,
        })
    }
}

fn emit(cli: &Cli, text: String) -> Result<()> {
    match (&cli.out, cli.command) {
        (Some(path), c) if !matches!(c, Command::Simulate) => {
            std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
        }
        _ => {
            println!("{text}");
            Ok(())
        }
    }
}

fn render(cli: &Cli, report: &Report) -> Result<String> {
    Ok(if cli.json { serde_json::to_string_pretty(report)? } else { report.to_text() })
}

fn run(cli: &Cli) -> Result<bool> {
    let plan = SamplePlan::default().with_seed(cli.seed).with_trials(cli.trials).with_tol(cli.tol);
    let Some(check) = cli.command.check() else {
        let corpus = match &cli.input {
            Some(dir) => Corpus::from_dir(dir)?,
            None => Corpus::embedded(),
        };
        let summary = selftest(&corpus, &plan);
        let text = if cli.json {
            serde_json::to_string_pretty(&summary)?
        } else {
            let mut lines: Vec<String> = summary.reports.iter().map(Report::to_text).collect();
            lines.push(format!("{}/{} reports as expected", summary.as_expected, summary.total));
            lines.join("\n")
        };
        emit(cli, text)?;
        return Ok(summary.ok);
    };
    let problem = match &cli.input {
        Some(path) => Problem::load(path).with_context(|| format!("loading {}", path.display()))?,
        None if check == Check::Simulate => Problem::from_json(
            r#"{"name": "default", "equation": "u_t - u_xy/u + u_x*u_y/u^2", "dependent": "u", "independent": ["t", "x", "y"]}"#,
        )?,
        None => return Err(anyhow!("{} needs --input PATH", check.name())),
    };
    let report = if check == Check::Simulate {
        let mut report = Report::new(problem.name.as_deref().unwrap_or("input"), check.name(), cli.seed);
        let start = std::time::Instant::now();
        match checks::simulate(&problem, &mut report) {
            Ok(out) => {
                if let Some(path) = &cli.out {
                    std::fs::write(path, out.to_csv()).with_context(|| format!("writing {}", path.display()))?;
                }
            }
            Err(e) => report = Report::failed(&report.case, check.name(), cli.seed, format!("{e:#}")),
        }
        report.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        report
    } else {
        checks::run(check, &problem, &plan)
    };
    emit(cli, render(cli, &report)?)?;
    Ok(report.status == Status::Pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
