//! The embedded problem corpus, its manifest of expected statuses, and the
//! self-test that runs every manifest entry.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use jetcas::numeric::SamplePlan;
use jetcas::problem::Problem;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{run, Check};
use crate::report::{Report, Status};

macro_rules! embed {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../corpus/", $name)))),*]
    };
}

/// Corpus files compiled into the binary.
pub const FILES: &[(&str, &str)] = embed!(
    "manifest.json",
    "ricci_euler.json",
    "ricci_euler_corrected.json",
    "ricci_multipliers.json",
    "ricci_fluxes.json",
    "ricci_link.json",
    "x1.json",
    "x2.json",
    "x3.json",
    "x4.json",
    "x5.json",
    "x6.json",
    "case2_xi.json",
    "case2_eta.json",
    "case2_xi_reduce.json",
    "general.json",
    "ricci_simulate.json",
);

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub check: Check,
    pub expect: Status,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub constraints: Vec<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub cases: Vec<ManifestEntry>,
}

/// Problem files keyed by file name, plus the manifest.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub manifest: Manifest,
    pub files: BTreeMap<String, String>,
}

impl Corpus {
    pub fn embedded() -> Corpus {
        let files: BTreeMap<String, String> = FILES.iter().map(|(n, t)| (n.to_string(), t.to_string())).collect();
        let manifest = serde_json::from_str(&files["manifest.json"]).expect("embedded manifest is valid");
        Corpus { manifest, files }
    }

    /// Reads `manifest.json` and the files it lists from `dir`.
    pub fn from_dir(dir: &Path) -> Result<Corpus> {
        let read = |name: &str| {
            std::fs::read_to_string(dir.join(name)).with_context(|| format!("reading {}", dir.join(name).display()))
        };
        let manifest: Manifest = serde_json::from_str(&read("manifest.json")?).context("parsing manifest.json")?;
        let mut files = BTreeMap::new();
        for entry in &manifest.cases {
            if !files.contains_key(&entry.file) {
                files.insert(entry.file.clone(), read(&entry.file)?);
            }
        }
        Ok(Corpus { manifest, files })
    }

    pub fn problem(&self, file: &str) -> Result<Problem> {
        let text = self.files.get(file).ok_or_else(|| anyhow!("corpus has no file {file}"))?;
        Problem::from_json(text).with_context(|| format!("loading {file}"))
    }
}

/// Outcome of the self-test, in manifest order.
#[derive(Clone, Debug, Serialize)]
pub struct SelftestSummary {
    pub reports: Vec<Report>,
    pub total: usize,
    pub as_expected: usize,
    pub ok: bool,
}

/// Reconciles a raw report with its manifest entry.
fn apply_expectation(mut report: Report, entry: &ManifestEntry) -> (Report, bool) {
    let raw = report.status;
    let matches = match entry.expect {
        Status::Discrepancy => raw == Status::Fail && report.error.is_none(),
        Status::Constraint => raw == Status::Constraint && report.constraints == entry.constraints,
        expected => raw == expected,
    };
    if matches && entry.expect == Status::Discrepancy {
        report.status = Status::Discrepancy;
    }
    if let Some(note) = &entry.note {
        report.add_note(note.clone());
    }
    if !matches {
        report.add_note(format!("manifest expects {:?}", entry.expect).to_lowercase());
        if report.status != Status::Fail {
            report.add_note(format!("actual status {raw:?}").to_lowercase());
        }
        report.status = Status::Fail;
    }
    (report, matches)
}

/// Runs every manifest entry concurrently; reports keep manifest order.
pub fn selftest(corpus: &Corpus, plan: &SamplePlan) -> SelftestSummary {
    let reports: Vec<(Report, bool)> = corpus
        .manifest
        .cases
        .par_iter()
        .map(|entry| {
            let start = Instant::now();
            let report = match corpus.problem(&entry.file) {
                Ok(problem) => run(entry.check, &problem, plan),
                Err(e) => {
                    let mut r = Report::failed(&entry.file, entry.check.name(), plan.seed, format!("{e:#}"));
                    r.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
                    r
                }
            };
            apply_expectation(report, entry)
        })
        .collect();
    let as_expected = reports.iter().filter(|(_, ok)| *ok).count();
    let total = reports.len();
    SelftestSummary { reports: reports.into_iter().map(|(r, _)| r).collect(), total, as_expected, ok: as_expected == total }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_only_embedded_files() {
        let c = Corpus::embedded();
        for e in &c.manifest.cases {
            assert!(c.files.contains_key(&e.file), "{} is not embedded", e.file);
        }
    }

    #[test]
    fn every_embedded_problem_loads() {
        let c = Corpus::embedded();
        for name in c.files.keys().filter(|n| *n != "manifest.json") {
            c.problem(name).unwrap();
        }
    }

    #[test]
    fn discrepancy_requires_failure() {
        let entry = ManifestEntry {
            file: "a.json".into(),
            check: Check::Decompose,
            expect: Status::Discrepancy,
            note: None,
            constraints: vec![],
        };
        let (r, ok) = apply_expectation(Report::new("a", "decompose", 42), &entry);
        assert!(!ok);
        assert_eq!(r.status, Status::Fail);
        let mut failing = Report::new("a", "decompose", 42);
        failing.status = Status::Fail;
        let (r, ok) = apply_expectation(failing, &entry);
        assert!(ok);
        assert_eq!(r.status, Status::Discrepancy);
        let broken = Report::failed("a", "decompose", 42, "cannot load".into());
        assert!(!apply_expectation(broken, &entry).1);
    }
}
