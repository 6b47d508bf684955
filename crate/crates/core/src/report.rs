//! Pass/fail reports with point witnesses, shared by the mechanism checks.

use serde::{Deserialize, Serialize};

/// Upper bound on witnesses stored per report; `violation_count` keeps the total.
pub const MAX_WITNESSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    /// Grid index of the offending point, when the check is grid-based.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    pub x: f64,
    /// Second coordinate for pairwise checks (the deviation target `y`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub detail: String,
}

impl Witness {
    pub fn at(index: usize, x: f64, detail: impl Into<String>) -> Self {
        Self {
            index: Some(index),
            x,
            y: None,
            detail: detail.into(),
        }
    }

    pub fn pair(x: f64, y: f64, detail: impl Into<String>) -> Self {
        Self {
            index: None,
            x,
            y: Some(y),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub violation_count: usize,
    pub witnesses: Vec<Witness>,
}

impl CheckReport {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: true,
            violation_count: 0,
            witnesses: Vec::new(),
        }
    }

    pub fn record(&mut self, witness: Witness) {
        self.passed = false;
        self.violation_count += 1;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(witness);
        }
    }

    pub fn merge(&mut self, other: CheckReport) {
        if !other.passed {
            self.passed = false;
        }
        self.violation_count += other.violation_count;
        for w in other.witnesses {
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(w);
            }
        }
    }

    pub fn into_result(self) -> crate::Result<()> {
        if self.passed {
            Ok(())
        } else {
            Err(crate::Error::Precondition(self))
        }
    }
}
