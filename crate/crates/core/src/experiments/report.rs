//! Reports, tolerances and CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

/// Acceptance region for one measured quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    AtMost { value: f64 },
    AtLeast { value: f64 },
    Within { target: f64, tol: f64 },
    Finite,
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost { value } => v <= value,
            Bound::AtLeast { value } => v >= value,
            Bound::Within { target, tol } => (v - target).abs() <= tol,
            Bound::Finite => v.is_finite(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

/// Outcome of one verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    /// The statement being checked.
    pub tag: String,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    pub config_hash: String,
    pub seed: u64,
}

impl Report {
    pub fn new(name: &str, tag: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            name: name.into(),
            tag: tag.into(),
            measured: BTreeMap::new(),
            tolerance: BTreeMap::new(),
            skip_reason: None,
            config_hash: config_hash.into(),
            seed,
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        self.measured.insert(key.into(), value);
    }

    /// Records `value` and the bound it must satisfy.
    pub fn check(&mut self, key: &str, value: f64, bound: Bound) {
        self.measured.insert(key.into(), value);
        self.tolerance.insert(key.into(), bound);
    }

    pub fn skip(mut self, reason: &str) -> Self {
        self.skip_reason = Some(reason.into());
        self
    }

    /// Pass iff every toleranced quantity was measured and lies in its bound.
    pub fn status(&self) -> Status {
        if self.skip_reason.is_some() {
            return Status::Skip;
        }
        let ok = self
            .tolerance
            .iter()
            .all(|(k, b)| self.measured.get(k).is_some_and(|v| b.admits(*v)));
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    /// Keys whose measured value is missing or outside the bound.
    pub fn violations(&self) -> Vec<String> {
        self.tolerance
            .iter()
            .filter(|(k, b)| !self.measured.get(*k).is_some_and(|v| b.admits(*v)))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn summary(&self) -> Summary {
        let status = self.status();
        Summary {
            name: self.name.clone(),
            tag: self.tag.clone(),
            status,
            pass: status != Status::Fail,
            measured: self.measured.clone(),
            tolerance: self.tolerance.clone(),
            skip_reason: self.skip_reason.clone(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
        }
    }
}

/// JSON summary entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub tag: String,
    pub status: Status,
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, Bound>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skip_reason: Option<String>,
    pub config_hash: String,
    pub seed: u64,
}

/// Numeric CSV table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:e}");
            }
            s.push('\n');
        }
        s
    }
}

/// A report with its detail table.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub table: Table,
}
