//! Check reports: named measurements, a verdict and tabular fit data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fit::LinearFit;
use crate::io::{write_atomic, write_csv_atomic};

/// Minimum coefficient of determination for a slope fit to count.
pub const MIN_FIT_QUALITY: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    /// Process exit code: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// Fail dominates inconclusive, which dominates pass.
    pub fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// One measured quantity, optionally asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    /// Human-readable acceptance rule, e.g. `"rel 0.1"` or `"<= 3.2e-4"`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// `R²` of the underlying fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// `None` for informational entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Measurement {
    pub fn info(name: impl Into<String>, value: f64) -> Self {
        Self {
            name: name.into(),
            value,
            expected: None,
            rule: None,
            window: None,
            quality: None,
            points: None,
            pass: None,
            note: None,
        }
    }

    /// Fitted slope against `expected` with relative tolerance; also requires
    /// fit quality of at least [`MIN_FIT_QUALITY`].
    pub fn slope(name: impl Into<String>, fit: &LinearFit, expected: f64, rel_tol: f64, window: [f64; 2]) -> Self {
        let ok = (fit.slope - expected).abs() <= rel_tol * expected.abs()
            && fit.r2 >= MIN_FIT_QUALITY
            && fit.slope.is_finite();
        Self {
            expected: Some(expected),
            rule: Some(format!("rel {rel_tol}, R² ≥ {MIN_FIT_QUALITY}")),
            window: Some(window),
            quality: Some(fit.r2),
            points: Some(fit.n),
            pass: Some(ok),
            ..Self::info(name, fit.slope)
        }
    }

    /// Fitted quantity reported without an expected value but gated on quality.
    pub fn fit_info(name: impl Into<String>, fit: &LinearFit, window: [f64; 2]) -> Self {
        Self {
            window: Some(window),
            quality: Some(fit.r2),
            points: Some(fit.n),
            ..Self::info(name, fit.slope)
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            rule: Some(format!("<= {limit:e}")),
            pass: Some(value <= limit),
            ..Self::info(name, value)
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            rule: Some(format!(">= {limit:e}")),
            pass: Some(value >= limit),
            ..Self::info(name, value)
        }
    }

    /// Boolean assertion carried as 1/0.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            rule: Some("holds".into()),
            pass: Some(ok),
            ..Self::info(name, if ok { 1.0 } else { 0.0 })
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_window(mut self, window: [f64; 2]) -> Self {
        self.window = Some(window);
        self
    }
}

/// Column-named numeric data behind a report, written as CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub params: BTreeMap<String, serde_json::Value>,
    pub measurements: Vec<Measurement>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconclusive_reason: Option<String>,
    #[serde(default)]
    pub artifacts: Vec<String>,
    #[serde(skip)]
    pub tables: Vec<Table>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            measurements: Vec::new(),
            verdict: Verdict::Pass,
            notes: Vec::new(),
            inconclusive_reason: None,
            artifacts: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.params.insert(key.to_string(), v);
        self
    }

    pub fn push(&mut self, m: Measurement) -> &mut Self {
        self.measurements.push(m);
        self.update();
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn table(&mut self, t: Table) -> &mut Self {
        self.tables.push(t);
        self
    }

    /// Marks the check as unable to decide; overrides pass and fail.
    pub fn inconclusive(&mut self, reason: impl Into<String>) -> &mut Self {
        let reason = reason.into();
        self.inconclusive_reason = Some(match self.inconclusive_reason.take() {
            Some(prev) => format!("{prev}; {reason}"),
            None => reason,
        });
        self.update();
        self
    }

    fn update(&mut self) {
        self.verdict = if self.inconclusive_reason.is_some() {
            Verdict::Inconclusive
        } else if self.measurements.iter().any(|m| m.pass == Some(false)) {
            Verdict::Fail
        } else {
            Verdict::Pass
        };
    }

    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name == name)
    }

    pub fn failed(&self) -> Vec<&Measurement> {
        self.measurements.iter().filter(|m| m.pass == Some(false)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "check {}: {}", self.name, self.verdict);
        for (k, v) in &self.params {
            let _ = writeln!(s, "  param {k} = {v}");
        }
        for m in &self.measurements {
            let mark = match m.pass {
                Some(true) => "ok  ",
                Some(false) => "FAIL",
                None => "    ",
            };
            let _ = write!(s, "  [{mark}] {} = {:.6e}", m.name, m.value);
            if let Some(e) = m.expected {
                let _ = write!(s, " (expected {e:.6e})");
            }
            if let Some(r) = &m.rule {
                let _ = write!(s, " rule {r}");
            }
            if let Some([a, b]) = m.window {
                let _ = write!(s, " window [{a:.3e}, {b:.3e}]");
            }
            if let Some(q) = m.quality {
                let _ = write!(s, " R²={q:.5}");
            }
            if let Some(n) = &m.note {
                let _ = write!(s, " ({n})");
            }
            s.push('\n');
        }
        if let Some(r) = &self.inconclusive_reason {
            let _ = writeln!(s, "  inconclusive: {r}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "  note: {n}");
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "  artifact {a}");
        }
        s
    }

    /// Writes `<name>.json`, `<name>.txt` and one CSV per table into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        self.artifacts.clear();
        for t in &self.tables {
            let file = format!("{}_{}.csv", self.name, t.name);
            let path = dir.join(&file);
            write_csv_atomic(&path, &t.columns, &t.rows)?;
            self.artifacts.push(file);
            paths.push(path);
        }
        let json = dir.join(format!("{}.json", self.name));
        write_atomic(&json, self.to_json()?.as_bytes())?;
        let txt = dir.join(format!("{}.txt", self.name));
        write_atomic(&txt, self.text().as_bytes())?;
        paths.push(json);
        paths.push(txt);
        Ok(paths)
    }
}

/// Reports keyed by check name; merging is order independent.
pub fn merge(reports: impl IntoIterator<Item = CheckReport>) -> BTreeMap<String, CheckReport> {
    reports.into_iter().map(|r| (r.name.clone(), r)).collect()
}

pub fn overall(reports: &BTreeMap<String, CheckReport>) -> Verdict {
    reports.values().fold(Verdict::Pass, |v, r| v.combine(r.verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(slope: f64, r2: f64) -> LinearFit {
        LinearFit {
            slope,
            intercept: 0.0,
            r2,
            n: 10,
        }
    }

    #[test]
    fn slope_rule() {
        assert_eq!(Measurement::slope("a", &fit(-2.4, 0.999), -2.5, 0.1, [1.0, 2.0]).pass, Some(true));
        assert_eq!(Measurement::slope("a", &fit(-2.0, 0.999), -2.5, 0.1, [1.0, 2.0]).pass, Some(false));
        assert_eq!(Measurement::slope("a", &fit(-2.5, 0.9), -2.5, 0.1, [1.0, 2.0]).pass, Some(false));
    }

    #[test]
    fn verdict_precedence() {
        let mut r = CheckReport::new("x");
        assert_eq!(r.verdict, Verdict::Pass);
        r.push(Measurement::info("i", 1.0));
        assert_eq!(r.verdict, Verdict::Pass);
        r.push(Measurement::at_most("m", 2.0, 1.0));
        assert_eq!(r.verdict, Verdict::Fail);
        r.inconclusive("budget");
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn combine_is_commutative_and_associative() {
        use Verdict::*;
        let all = [Pass, Fail, Inconclusive];
        for a in all {
            for b in all {
                assert_eq!(a.combine(b), b.combine(a));
                for c in all {
                    assert_eq!(a.combine(b).combine(c), a.combine(b.combine(c)));
                }
            }
        }
    }

    #[test]
    fn write_emits_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = CheckReport::new("demo");
        r.param("p", 1.6);
        let mut t = Table::new("fit", &["t", "y"]);
        t.push(vec![1.0, 2.0]);
        r.table(t);
        r.push(Measurement::at_least("v", 1.0, 0.0));
        let paths = r.write(dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(r.artifacts, vec!["demo_fit.csv".to_string()]);
        let back: CheckReport =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("demo.json")).unwrap()).unwrap();
        assert_eq!(back.verdict, Verdict::Pass);
        assert_eq!(back.artifacts, r.artifacts);
    }
}
