//! Pass/fail report of the acceptance checks.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion number, 1 to 10.
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub measured: BTreeMap<String, f64>,
}

impl Check {
    pub fn new(id: u8, name: &str) -> Self {
        Self {
            id,
            name: name.to_string(),
            passed: true,
            detail: String::new(),
            measured: BTreeMap::new(),
        }
    }

    /// Records `value` and fails the check when `ok` is false.
    pub fn expect(&mut self, key: &str, value: f64, ok: bool, what: &str) {
        self.measured.insert(key.to_string(), value);
        if !ok {
            self.passed = false;
            if !self.detail.is_empty() {
                self.detail.push_str("; ");
            }
            self.detail.push_str(&format!("{what} ({key} = {value:e})"));
        }
    }

    pub fn record(&mut self, key: &str, value: f64) {
        self.measured.insert(key.to_string(), value);
    }

    pub fn fail(&mut self, why: &str) {
        self.passed = false;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail.push_str(why);
    }

    pub fn line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        if self.detail.is_empty() {
            format!("[{status}] {:>2}. {}", self.id, self.name)
        } else {
            format!("[{status}] {:>2}. {}: {}", self.id, self.name, self.detail)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub seconds: f64,
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub constants: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub stages: Vec<StageReport>,
    pub checks: Vec<Check>,
    pub total_seconds: f64,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, id: u8) -> Option<&Check> {
        self.checks.iter().find(|c| c.id == id)
    }

    /// Adds a check, replacing an earlier one with the same id.
    pub fn push(&mut self, check: Check) {
        self.checks.retain(|c| c.id != check.id);
        self.checks.push(check);
        self.checks.sort_by_key(|c| c.id);
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&c.line());
            s.push('\n');
        }
        s
    }
}
