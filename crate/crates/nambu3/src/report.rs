//! Pass/fail reports for identity checks.
//!
//! Every verification operation returns a [`CheckReport`]: one entry per
//! identity with its label, worst relative residual, and the point where it
//! occurred. A report passes iff every identity does.

use serde::Serialize;

use crate::expr::{EquivReport, Point};

#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub label: String,
    pub pass: bool,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_point: Option<Point>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl IdentityCheck {
    pub fn from_equiv(label: impl Into<String>, report: &EquivReport) -> IdentityCheck {
        IdentityCheck {
            label: label.into(),
            pass: report.equivalent,
            residual: report.max_residual,
            worst_point: Some(report.worst_point.clone()),
            note: None,
        }
    }

    pub fn from_residual(label: impl Into<String>, residual: f64, tol: f64) -> IdentityCheck {
        IdentityCheck {
            label: label.into(),
            pass: residual <= tol,
            residual,
            worst_point: None,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> IdentityCheck {
        self.note = Some(note.into());
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub pass: bool,
    pub identities: Vec<IdentityCheck>,
}

impl CheckReport {
    pub fn new(identities: Vec<IdentityCheck>) -> CheckReport {
        CheckReport {
            pass: identities.iter().all(|c| c.pass),
            identities,
        }
    }

    pub fn empty() -> CheckReport {
        CheckReport {
            pass: true,
            identities: Vec::new(),
        }
    }

    pub fn push(&mut self, check: IdentityCheck) {
        self.pass &= check.pass;
        self.identities.push(check);
    }

    pub fn merge(&mut self, other: CheckReport) {
        for c in other.identities {
            self.push(c);
        }
    }

    /// Worst residual across all identities.
    pub fn max_residual(&self) -> f64 {
        self.identities
            .iter()
            .map(|c| c.residual)
            .fold(0.0, f64::max)
    }

    /// Labels of the identities that failed.
    pub fn failed_labels(&self) -> Vec<&str> {
        self.identities
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.label.as_str())
            .collect()
    }
}
