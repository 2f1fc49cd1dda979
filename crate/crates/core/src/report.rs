use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// One line of a verification report (JSONL).
///
/// `max_deviation` is the worst value of the quantity the check bounds: a
/// relative error for identities, or the largest amount by which an
/// inequality came closest to (or went past) failing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub test: String,
    pub graph: String,
    pub trials: usize,
    pub max_deviation: f64,
    pub violations: usize,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witnesses: Vec<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CheckReport {
    pub fn new(test: impl Into<String>, graph: impl Into<String>) -> Self {
        CheckReport {
            test: test.into(),
            graph: graph.into(),
            trials: 0,
            max_deviation: 0.0,
            violations: 0,
            passed: true,
            witnesses: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Record one trial: `deviation` feeds the maximum, `ok` the verdict.
    pub fn record(&mut self, deviation: f64, ok: bool, witness: impl FnOnce() -> Value) {
        self.trials += 1;
        if deviation > self.max_deviation || deviation.is_nan() {
            self.max_deviation = deviation;
        }
        if !ok {
            self.violations += 1;
            self.passed = false;
            if self.witnesses.len() < 8 {
                self.witnesses.push(witness());
            }
        }
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn fail(&mut self, why: impl Into<String>) {
        self.passed = false;
        self.notes.push(why.into());
    }

    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}
