use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

/// One violated (or noteworthy) constraint, with the observed value and
/// what was allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub subject: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
    /// Derived quantities computed while validating (e.g. `fps`).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub derived: BTreeMap<String, f64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        !self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn count(&self, severity: Severity) -> usize {
        self.findings.iter().filter(|f| f.severity == severity).count()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub(crate) fn push(
        &mut self,
        severity: Severity,
        code: &str,
        subject: impl Into<String>,
        message: impl Into<String>,
        observed: Option<String>,
        allowed: Option<String>,
    ) {
        self.findings.push(Finding {
            severity,
            code: code.into(),
            subject: subject.into(),
            message: message.into(),
            observed,
            allowed,
        });
    }

    pub(crate) fn error(&mut self, code: &str, subject: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Error, code, subject, message, None, None);
    }

    /// Appends another report, rewriting error findings to `downgrade_to`
    /// when given.
    pub fn merge(&mut self, other: ValidationReport, downgrade_to: Option<Severity>) {
        for mut f in other.findings {
            if let (Some(sev), Severity::Error) = (downgrade_to, f.severity) {
                f.severity = sev;
            }
            self.findings.push(f);
        }
        self.derived.extend(other.derived);
    }
}
