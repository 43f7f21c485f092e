//! Machine-readable verification results.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Status {
    #[serde(rename = "pass")]
    Pass,
    #[serde(rename = "fail")]
    Fail,
    #[serde(rename = "skipped:hypothesis")]
    SkippedHypothesis,
}

/// One compared quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub suite: String,
    /// Human-readable formula label, e.g. `"dS = Δ(Tr h) + δδh − <Ric, h>"`.
    pub formula: String,
    pub direction: Option<usize>,
    pub residual: f64,
    pub tolerance: f64,
    /// Fitted convergence order, when one was measured.
    pub order: Option<f64>,
    /// Minimum acceptable order, when the order is part of the check.
    pub min_order: Option<f64>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

impl ReportEntry {
    /// Passes iff `residual ≤ tolerance` (and is finite).
    pub fn new(
        suite: &str,
        formula: &str,
        direction: Option<usize>,
        residual: f64,
        tolerance: f64,
        order: Option<f64>,
    ) -> Self {
        let status = if residual.is_finite() && residual <= tolerance {
            Status::Pass
        } else {
            Status::Fail
        };
        ReportEntry {
            suite: suite.to_string(),
            formula: formula.to_string(),
            direction,
            residual,
            tolerance,
            order,
            min_order: None,
            status,
            note: None,
        }
    }

    /// Additionally requires `order ≥ min_order`.
    pub fn require_order(mut self, min_order: f64) -> Self {
        self.min_order = Some(min_order);
        let ok = self.order.map(|o| o.is_finite() && o >= min_order).unwrap_or(false);
        if !ok {
            self.status = Status::Fail;
        }
        self
    }

    pub fn skipped(suite: &str, formula: &str, direction: Option<usize>, reason: String) -> Self {
        ReportEntry {
            suite: suite.to_string(),
            formula: formula.to_string(),
            direction,
            residual: f64::NAN,
            tolerance: f64::NAN,
            order: None,
            min_order: None,
            status: Status::SkippedHypothesis,
            note: Some(reason),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub entries: Vec<ReportEntry>,
}

impl VerificationReport {
    pub fn push(&mut self, e: ReportEntry) {
        self.entries.push(e);
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.entries.extend(other.entries);
    }

    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        for e in &self.entries {
            match e.status {
                Status::Pass => s.pass += 1,
                Status::Fail => s.fail += 1,
                Status::SkippedHypothesis => s.skipped += 1,
            }
        }
        s
    }

    /// True when no entry failed (skipped entries do not count against).
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail)
    }

    /// Stable order: suite, formula, direction.
    pub fn sort(&mut self) {
        self.entries.sort_by(|a, b| {
            (&a.suite, &a.formula, a.direction).cmp(&(&b.suite, &b.formula, b.direction))
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_rules() {
        assert!(ReportEntry::new("s", "f", None, 1e-9, 1e-8, None).passed());
        assert!(!ReportEntry::new("s", "f", None, 1e-7, 1e-8, None).passed());
        assert!(!ReportEntry::new("s", "f", None, f64::NAN, 1e-8, None).passed());
        assert!(!ReportEntry::new("s", "f", None, 0.0, 1e-8, Some(1.5)).require_order(1.9).passed());
        assert!(ReportEntry::new("s", "f", None, 0.0, 1e-8, Some(2.0)).require_order(1.9).passed());
    }

    #[test]
    fn summary_and_serialization() {
        let mut r = VerificationReport::default();
        r.push(ReportEntry::new("b", "f", Some(1), 0.0, 1.0, None));
        r.push(ReportEntry::skipped("a", "f", None, "no".into()));
        r.push(ReportEntry::new("a", "f", None, 2.0, 1.0, None));
        r.sort();
        assert_eq!(r.entries[0].suite, "a");
        let s = r.summary();
        assert_eq!((s.pass, s.fail, s.skipped), (1, 1, 1));
        assert!(!r.all_passed());
        let json = serde_json::to_string(&r.entries[0]).unwrap();
        assert!(json.contains("\"skipped:hypothesis\""), "{json}");
    }
}
