use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// One numerical check. Equalities store `|lhs − rhs|` as the residual;
/// inequalities `lhs ≤ rhs` store the signed excess `lhs − rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub t: Option<usize>,
    pub i: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckRecord {
    pub fn equality(name: &str, t: Option<usize>, i: Option<usize>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = (lhs - rhs).abs();
        CheckRecord {
            name: name.into(),
            t,
            i,
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// `lhs ≤ rhs + tolerance`
    pub fn at_most(name: &str, t: Option<usize>, i: Option<usize>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = lhs - rhs;
        CheckRecord {
            name: name.into(),
            t,
            i,
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }

    /// `lhs ≥ rhs − tolerance`
    pub fn at_least(name: &str, t: Option<usize>, i: Option<usize>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = rhs - lhs;
        CheckRecord {
            name: name.into(),
            t,
            i,
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub instance: String,
    pub checks: Vec<CheckRecord>,
    pub precondition_violations: Vec<String>,
}

impl VerificationReport {
    pub fn new(instance: impl Into<String>) -> Self {
        VerificationReport {
            instance: instance.into(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.checks.push(check);
    }

    /// True when every hypothesis held and every check passed.
    pub fn passed(&self) -> bool {
        self.precondition_violations.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn count(&self, name: &str) -> usize {
        self.checks.iter().filter(|c| c.name == name).count()
    }

    /// Largest residual-to-tolerance excess among checks called `name`.
    pub fn worst(&self, name: &str) -> Option<&CheckRecord> {
        self.checks
            .iter()
            .filter(|c| c.name == name)
            .max_by(|a, b| (a.residual - a.tolerance).total_cmp(&(b.residual - b.tolerance)))
    }

    pub fn extend(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
        self.precondition_violations.extend(other.precondition_violations);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_matches_tolerance() {
        assert!(CheckRecord::equality("e", None, None, 1.0, 1.0 + 1e-13, 1e-12).pass);
        assert!(!CheckRecord::equality("e", None, None, 1.0, 1.1, 1e-12).pass);
        assert!(CheckRecord::at_most("le", None, None, 1.0, 2.0, 0.0).pass);
        assert!(!CheckRecord::at_most("le", None, None, 2.0, 1.0, 0.5).pass);
        assert!(CheckRecord::at_least("ge", None, None, 1.0, 1.0 + 1e-12, 1e-9).pass);
        let mut r = VerificationReport::new("x");
        r.push(CheckRecord::at_most("le", Some(3), Some(0), 2.0, 1.0, 0.5));
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        assert_eq!(r.worst("le").unwrap().t, Some(3));
        let mut ok = VerificationReport::new("y");
        ok.precondition_violations.push("bad".into());
        assert!(!ok.passed());
    }
}
