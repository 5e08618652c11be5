//! Serializable check reports.
//!
//! Every check in the crate produces either an [`EstimateReport`] (worst margin of an
//! inequality over sampled points) or a [`GapReport`] (most negative LHS - RHS of a
//! differential inequality). Both serialize to JSON with stable field names.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Where the worst margin of a check was attained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WorstPoint {
    Pair { rx: f64, ry: f64, t: f64 },
    Point { r: f64, t: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n: usize,
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub check: String,
    pub case: Option<String>,
    #[serde(rename = "C_fit", default, skip_serializing_if = "Option::is_none")]
    pub c_fit: Option<f64>,
    #[serde(rename = "C_used", default, skip_serializing_if = "Option::is_none")]
    pub c_used: Option<f64>,
    pub worst_margin: f64,
    pub worst_point: WorstPoint,
    pub pass: bool,
    pub tolerances: BTreeMap<String, f64>,
    pub grid: Option<GridInfo>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl EstimateReport {
    pub fn new(
        check: impl Into<String>,
        worst_margin: f64,
        worst_point: WorstPoint,
        pass: bool,
    ) -> Self {
        Self {
            check: check.into(),
            case: None,
            c_fit: None,
            c_used: None,
            worst_margin,
            worst_point,
            pass,
            tolerances: BTreeMap::new(),
            grid: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_tolerance(mut self, name: &str, value: f64) -> Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn with_detail(mut self, name: &str, value: f64) -> Self {
        self.details.insert(name.to_string(), value);
        self
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub r: f64,
    pub t: f64,
}

/// Audit of a differential inequality LHS >= RHS over a space-time lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub check: String,
    /// Most negative LHS - RHS over the checked points.
    pub min_gap: f64,
    pub location: Location,
    pub tolerance: f64,
    pub checked: usize,
    pub skipped: usize,
    pub pass: bool,
    pub grid: Option<GridInfo>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
}

impl GapReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}
