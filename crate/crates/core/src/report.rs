//! Pass/fail bookkeeping shared by all checks.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One asserted inequality `lhs <= rhs + slack`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub lines: Vec<CheckLine>,
    /// Diagnostic values that are reported but not asserted.
    pub values: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        CheckReport { name: name.into(), ..Default::default() }
    }

    pub fn push(&mut self, label: impl Into<String>, lhs: f64, rhs: f64, slack: f64) -> bool {
        let passed = lhs.is_finite() && lhs <= rhs + slack;
        self.lines.push(CheckLine { label: label.into(), lhs, rhs, slack, passed });
        passed
    }

    pub fn value(&mut self, key: impl Into<String>, v: f64) {
        self.values.insert(key.into(), v);
    }

    pub fn note(&mut self, n: impl Into<String>) {
        self.notes.push(n.into());
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn first_violation(&self) -> Option<&CheckLine> {
        self.lines.iter().find(|l| !l.passed)
    }

    /// Largest `lhs / rhs` over all lines.
    pub fn worst_ratio(&self) -> f64 {
        self.lines
            .iter()
            .map(|l| if l.rhs > 0.0 { l.lhs / l.rhs } else if l.lhs > 0.0 { f64::INFINITY } else { 0.0 })
            .fold(0.0, f64::max)
    }

    pub fn merge(&mut self, other: CheckReport) {
        let prefix = other.name.clone();
        for mut l in other.lines {
            l.label = format!("{prefix}: {}", l.label);
            self.lines.push(l);
        }
        for (k, v) in other.values {
            self.values.insert(format!("{prefix}: {k}"), v);
        }
        self.notes.extend(other.notes);
    }
}

/// Slack added to every asserted bound: twice the numerical error budget plus a floor.
pub fn slack(quad_error: f64, tail_bound: f64) -> f64 {
    2.0 * (quad_error + tail_bound + 1e-9)
}
