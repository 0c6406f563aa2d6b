//! Uniform check reports.

use jetcas::report::{ResidualReport, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Constraint,
    Discrepancy,
    Undecided,
    Fail,
}

impl Status {
    pub fn from_verdict(v: Verdict) -> Status {
        match v {
            Verdict::Zero => Status::Pass,
            Verdict::Constrained => Status::Constraint,
            Verdict::Nonzero => Status::Fail,
            Verdict::Undecided => Status::Undecided,
        }
    }

    /// Combines two statuses, keeping the worse one.
    pub fn and(self, other: Status) -> Status {
        self.max(other)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub case: String,
    pub check: String,
    pub status: Status,
    pub residuals: Vec<String>,
    pub constraints: Vec<String>,
    /// Largest sampled magnitude over the numeric evidence gathered.
    pub numeric_max: Option<f64>,
    pub seed: u64,
    pub note: Option<String>,
    /// Set when the check could not run.
    pub error: Option<String>,
    pub details: Value,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

impl Report {
    pub fn new(case: &str, check: &str, seed: u64) -> Report {
        Report {
            case: case.to_string(),
            check: check.to_string(),
            status: Status::Pass,
            residuals: Vec::new(),
            constraints: Vec::new(),
            numeric_max: None,
            seed,
            note: None,
            error: None,
            details: Value::Null,
            elapsed_ms: 0.0,
        }
    }

    pub fn failed(case: &str, check: &str, seed: u64, message: String) -> Report {
        let mut r = Report::new(case, check, seed);
        r.status = Status::Fail;
        r.error = Some(message);
        r
    }

    pub fn record_numeric(&mut self, value: f64) {
        if value.is_finite() {
            self.numeric_max = Some(self.numeric_max.map_or(value, |m| m.max(value)));
        }
    }

    /// Folds a residual report into the status, residual list and evidence.
    pub fn absorb(&mut self, r: &ResidualReport) {
        self.status = self.status.and(Status::from_verdict(r.verdict));
        if !r.residual.is_zero() {
            self.residuals.push(r.residual.to_string());
        }
        self.constraints.extend(r.constraints.iter().map(|c| c.to_string()));
        self.record_numeric(r.numeric.max_abs);
        if self.note.is_none() {
            self.note.clone_from(&r.note);
        }
    }

    pub fn add_note(&mut self, note: impl Into<String>) {
        let note = note.into();
        self.note = Some(match self.note.take() {
            Some(prev) => format!("{prev}; {note}"),
            None => note,
        });
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {:?}", self.case, self.check, self.status).to_lowercase();
        if let Some(e) = &self.error {
            out.push_str(&format!("\n  error: {e}"));
        }
        if let Some(n) = &self.note {
            out.push_str(&format!("\n  note: {n}"));
        }
        for r in &self.residuals {
            out.push_str(&format!("\n  residual: {r}"));
        }
        for c in &self.constraints {
            out.push_str(&format!("\n  constraint: {c} = 0"));
        }
        if let Some(m) = self.numeric_max {
            out.push_str(&format!("\n  numeric max: {m:e}"));
        }
        if let Value::Object(map) = &self.details {
            for (k, v) in map {
                match v {
                    Value::String(s) => out.push_str(&format!("\n  {k}: {s}")),
                    Value::Array(items) => {
                        out.push_str(&format!("\n  {k}:"));
                        for item in items {
                            match item {
                                Value::String(s) => out.push_str(&format!("\n    {s}")),
                                other => out.push_str(&format!("\n    {other}")),
                            }
                        }
                    }
                    other => out.push_str(&format!("\n  {k}: {other}")),
                }
            }
        }
        out.push_str(&format!("\n  elapsed: {:.1} ms", self.elapsed_ms));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_status_wins() {
        assert_eq!(Status::Pass.and(Status::Constraint), Status::Constraint);
        assert_eq!(Status::Undecided.and(Status::Fail), Status::Fail);
        assert_eq!(Status::Pass.and(Status::Pass), Status::Pass);
    }

    #[test]
    fn elapsed_is_not_serialized() {
        let mut r = Report::new("c", "euler", 42);
        r.elapsed_ms = 12.5;
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("elapsed_ms").is_none());
        assert_eq!(json["status"], "pass");
    }
}
