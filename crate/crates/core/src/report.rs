//! Check records and their table, JSON and CSV renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

use crate::check::Comparison;
use crate::integrate::IntegralCheck;

pub const SCHEMA: &str = "weylcheck.report/v1";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_CONVERGENCE: i32 = 4;

/// One identity: both sides, the residual and the verdict.
///
/// `pass` is `relative <= tolerance`, where `relative = residual / scale`.
#[derive(Clone, Debug, Serialize)]
pub struct CheckRecord {
    pub suite: String,
    pub name: String,
    /// The statement the check instantiates.
    pub anchor: String,
    pub point: Option<Vec<f64>>,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub scale: f64,
    pub relative: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Quadrature error estimate, for integrals.
    pub error: Option<f64>,
    /// Grid-doubling stability, for integrals.
    pub converged: Option<bool>,
    /// False for variants reported for comparison only; they never fail a run.
    pub normative: bool,
}

impl CheckRecord {
    pub fn new(suite: &str, name: impl Into<String>, anchor: &str, point: Option<&[f64]>, c: Comparison, tolerance: f64) -> Self {
        let relative = c.relative();
        CheckRecord {
            suite: suite.to_string(),
            name: name.into(),
            anchor: anchor.to_string(),
            point: point.map(<[f64]>::to_vec),
            lhs: c.lhs,
            rhs: c.rhs,
            residual: c.residual,
            scale: c.scale,
            relative,
            tolerance,
            pass: relative <= tolerance,
            error: None,
            converged: None,
            normative: true,
        }
    }

    /// A quantity that should vanish, measured against `scale`.
    pub fn vanishing(suite: &str, name: impl Into<String>, anchor: &str, point: Option<&[f64]>, value: f64, scale: f64, tolerance: f64) -> Self {
        let c = Comparison { lhs: value, rhs: 0.0, residual: value.abs(), scale: scale.max(1.0) };
        CheckRecord::new(suite, name, anchor, point, c, tolerance)
    }

    /// A lower bound `value > threshold`: the residual is the shortfall and
    /// the tolerance is zero.
    pub fn at_least(suite: &str, name: impl Into<String>, anchor: &str, point: Option<&[f64]>, value: f64, threshold: f64) -> Self {
        let shortfall = if value > threshold { 0.0 } else { (threshold - value).max(f64::MIN_POSITIVE) };
        let c = Comparison { lhs: value, rhs: threshold, residual: shortfall, scale: 1.0 };
        CheckRecord::new(suite, name, anchor, point, c, 0.0)
    }

    pub fn from_integral(suite: &str, c: &IntegralCheck) -> Self {
        let mut r = CheckRecord::new(suite, c.name.clone(), c.anchor, None, c.comparison, c.tol);
        r.error = Some(c.lhs.error + c.rhs.error);
        r.converged = Some(c.converged);
        r.normative = c.normative;
        r
    }

    pub fn informational(mut self) -> Self {
        self.normative = false;
        self
    }

    fn status(&self) -> &'static str {
        match (self.pass, self.normative, self.converged) {
            (_, false, _) => "info",
            (true, true, Some(false)) => "UNSTABLE",
            (true, true, _) => "ok",
            (false, true, _) => "FAIL",
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    /// Non-normative records.
    pub informational: usize,
    /// Normative integrals whose value moved under grid doubling.
    pub unconverged: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub subject: Option<String>,
    pub checks: Vec<CheckRecord>,
    /// Results that are not two-sided checks, such as a classification.
    pub details: BTreeMap<String, Value>,
    pub summary: Summary,
}

impl Report {
    pub fn new(command: Vec<String>, subject: Option<String>) -> Self {
        Report {
            schema: SCHEMA,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            subject,
            checks: Vec::new(),
            details: BTreeMap::new(),
            summary: Summary::default(),
        }
    }

    pub fn push(&mut self, r: CheckRecord) {
        self.checks.push(r);
        self.summarize();
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = CheckRecord>) {
        self.checks.extend(rs);
        self.summarize();
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.details.insert(key.to_string(), v);
    }

    fn summarize(&mut self) {
        let mut s = Summary { total: self.checks.len(), ..Summary::default() };
        for c in &self.checks {
            if !c.normative {
                s.informational += 1;
            } else if c.pass {
                s.passed += 1;
            } else {
                s.failed += 1;
            }
            if c.normative && c.converged == Some(false) {
                s.unconverged += 1;
            }
        }
        self.summary = s;
    }

    /// 1 if a normative check fails on a stable grid, 4 if the only problems
    /// are unstable integrals, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        let hard = self.checks.iter().any(|c| c.normative && !c.pass && c.converged != Some(false));
        if hard {
            EXIT_FAIL
        } else if self.summary.unconverged > 0 {
            EXIT_CONVERGENCE
        } else {
            EXIT_PASS
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        #[derive(Serialize)]
        struct Row<'a> {
            suite: &'a str,
            name: &'a str,
            anchor: &'a str,
            point: String,
            lhs: f64,
            rhs: f64,
            residual: f64,
            scale: f64,
            relative: f64,
            tolerance: f64,
            pass: bool,
            error: Option<f64>,
            converged: Option<bool>,
            normative: bool,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for c in &self.checks {
            w.serialize(Row {
                suite: &c.suite,
                name: &c.name,
                anchor: &c.anchor,
                point: c.point.as_ref().map(|p| join(p)).unwrap_or_default(),
                lhs: c.lhs,
                rhs: c.rhs,
                residual: c.residual,
                scale: c.scale,
                relative: c.relative,
                tolerance: c.tolerance,
                pass: c.pass,
                error: c.error,
                converged: c.converged,
                normative: c.normative,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}  {}", self.tool, self.version, self.command.join(" "));
        if let Some(s) = &self.subject {
            let _ = writeln!(out, "subject: {s}");
        }
        for (k, v) in &self.details {
            match v {
                Value::String(s) => {
                    let _ = writeln!(out, "{k}: {s}");
                }
                other => {
                    let _ = writeln!(out, "{k}: {other}");
                }
            }
        }
        if !self.checks.is_empty() {
            let rows: Vec<[String; 8]> = self
                .checks
                .iter()
                .map(|c| {
                    [
                        c.suite.clone(),
                        c.name.clone(),
                        c.point.as_ref().map(|p| join(p)).unwrap_or_else(|| "-".into()),
                        format!("{:.6e}", c.lhs),
                        format!("{:.6e}", c.rhs),
                        format!("{:.2e}", c.relative),
                        format!("{:.0e}", c.tolerance),
                        c.status().to_string(),
                    ]
                })
                .collect();
            let header = ["suite", "check", "point", "lhs", "rhs", "rel.residual", "tol", "status"].map(String::from);
            let mut widths = header.clone().map(|h| h.len());
            for r in &rows {
                for (w, cell) in widths.iter_mut().zip(r) {
                    *w = (*w).max(cell.len());
                }
            }
            for r in std::iter::once(&header).chain(&rows) {
                let line: Vec<String> = r.iter().zip(widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
                let _ = writeln!(out, "{}", line.join("  ").trim_end());
            }
        }
        let s = &self.summary;
        let _ = writeln!(
            out,
            "{} checks: {} passed, {} failed, {} informational, {} unstable under grid doubling",
            s.total, s.passed, s.failed, s.informational, s.unconverged
        );
        out
    }
}

fn join(p: &[f64]) -> String {
    p.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(";")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(lhs: f64, rhs: f64, tol: f64) -> CheckRecord {
        CheckRecord::new("t", "x", "a", None, Comparison::scalars(lhs, rhs, 1.0), tol)
    }

    #[test]
    fn pass_iff_relative_within_tolerance() {
        assert!(rec(1.0, 1.0 + 1e-9, 1e-8).pass);
        assert!(!rec(1.0, 1.1, 1e-8).pass);
        assert!(!rec(f64::NAN, 0.0, 1e-8).pass);
        assert!(CheckRecord::at_least("t", "g", "a", None, 0.5, 1e-4).pass);
        assert!(!CheckRecord::at_least("t", "g", "a", None, 0.0, 1e-4).pass);
    }

    #[test]
    fn exit_codes() {
        let mut r = Report::new(vec!["verify".into()], None);
        r.push(rec(1.0, 1.0, 1e-8));
        assert_eq!(r.exit_code(), EXIT_PASS);
        r.push(rec(1.0, 2.0, 1e-8).informational());
        assert_eq!(r.exit_code(), EXIT_PASS);
        let mut unstable = rec(1.0, 1.0, 1e-8);
        unstable.converged = Some(false);
        r.push(unstable);
        assert_eq!(r.exit_code(), EXIT_CONVERGENCE);
        r.push(rec(1.0, 2.0, 1e-8));
        assert_eq!(r.exit_code(), EXIT_FAIL);
        assert_eq!(r.summary.failed, 1);
        assert_eq!(r.summary.informational, 1);
    }

    #[test]
    fn renderings() {
        let mut r = Report::new(vec!["verify".into()], Some("s2xr2".into()));
        r.push(rec(1.0, 1.0, 1e-8));
        r.detail("note", "hello");
        let v: Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["schema"], SCHEMA);
        assert_eq!(v["checks"][0]["pass"], true);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("suite,name,anchor,point,lhs"));
        assert_eq!(csv.lines().count(), 2);
        assert!(r.to_table().contains("note: hello"));
    }
}
