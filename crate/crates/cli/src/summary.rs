//! Run summaries and the exit-code contract.

use polywall::diagnostics::ScalingFit;
use serde::Serialize;
use std::collections::BTreeMap;

/// One pass/fail flag tied to a numbered acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub criterion: u8,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, criterion: u8, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            criterion,
            passed,
            detail: detail.into(),
        }
    }
}

/// Observables of one sweep point (or the single point of a plain run).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointSummary {
    pub value: f64,
    pub steps: u64,
    pub observables: BTreeMap<String, f64>,
    /// Set when the point's run aborted; the sweep carries on without it.
    pub error: Option<String>,
}

impl PointSummary {
    pub fn new(value: f64) -> Self {
        Self {
            value,
            steps: 0,
            observables: BTreeMap::new(),
            error: None,
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.observables.get(key).copied()
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.observables.insert(key.to_string(), value);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub kind: String,
    pub plan: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub points: Vec<PointSummary>,
    pub fits: BTreeMap<String, ScalingFit>,
    pub checks: Vec<Check>,
    pub total_steps: u64,
    pub wall_clock_seconds: f64,
}

impl RunSummary {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// 0 when every check passes, 1 when a physics check fails.
    pub fn exit_code(&self) -> i32 {
        if self.all_passed() {
            0
        } else {
            1
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Exit code for configuration errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for runtime failures.
pub const EXIT_RUNTIME: i32 = 3;
