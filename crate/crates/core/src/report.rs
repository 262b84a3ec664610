//! Pass/fail records shared by every diagnostic.

use serde::Serialize;

const MAX_WITNESSES: usize = 5;

/// One sampled assertion: how many cases were tried, the worst deviation
/// seen, and a few witnesses of failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    pub worst: f64,
    pub tolerance: f64,
    pub witnesses: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Assertion {
    pub fn new(name: impl Into<String>, tolerance: f64) -> Self {
        Assertion {
            name: name.into(),
            passed: true,
            samples: 0,
            worst: 0.0,
            tolerance,
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records a deviation; anything above the tolerance (or NaN) fails.
    pub fn observe(&mut self, deviation: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if deviation > self.worst || deviation.is_nan() {
            self.worst = deviation;
        }
        if !(deviation <= self.tolerance) {
            self.fail(witness());
        }
    }

    /// Records a boolean outcome.
    pub fn check(&mut self, ok: bool, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if !ok {
            self.fail(witness());
        }
    }

    pub fn fail(&mut self, witness: String) {
        self.passed = false;
        if self.witnesses.len() < MAX_WITNESSES {
            self.witnesses.push(witness);
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    /// Records an error as a failure.
    pub fn error(&mut self, e: &crate::Error) {
        self.samples += 1;
        self.fail(format!("error: {e}"));
    }

    /// An assertion that passes only if the expected outcome was observed.
    pub fn expect(name: impl Into<String>, ok: bool, witness: impl FnOnce() -> String) -> Self {
        let mut a = Assertion::new(name, 0.0);
        a.check(ok, witness);
        a
    }
}

/// `true` iff every assertion passed.
pub fn all_passed(assertions: &[Assertion]) -> bool {
    assertions.iter().all(|a| a.passed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviations_above_tolerance_fail() {
        let mut a = Assertion::new("x", 1e-6);
        a.observe(1e-7, || unreachable!());
        assert!(a.passed);
        a.observe(1e-3, || "p".into());
        a.observe(f64::NAN, || "q".into());
        assert!(!a.passed);
        assert_eq!(a.samples, 3);
        assert_eq!(a.witnesses, vec!["p".to_string(), "q".to_string()]);
    }
}
