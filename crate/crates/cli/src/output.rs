//! The JSON envelope shared by every subcommand.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

pub const SCHEMA: &str = "roughint/1";

/// Result of one subcommand before serialization.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub command: &'static str,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
    pub metadata: Value,
    pub result: Value,
}

impl Outcome {
    pub fn new(command: &'static str) -> Self {
        Self {
            command,
            violations: Vec::new(),
            warnings: Vec::new(),
            metadata: Value::Null,
            result: Value::Null,
        }
    }

    pub fn violate(&mut self, msg: impl Into<String>) {
        self.violations.push(msg.into());
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn hypotheses_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "schema": SCHEMA,
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "hypotheses_ok": self.hypotheses_ok(),
            "violations": self.violations,
            "warnings": self.warnings,
            "metadata": self.metadata,
            "result": self.result,
        })
    }
}

/// Pretty JSON to `out`, or to standard output.
pub fn emit(value: &Value, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_keys_are_sorted_and_flag_violations() {
        let mut o = Outcome::new("variability");
        o.violate("norm is infinite");
        let v = o.to_json();
        assert_eq!(v["hypotheses_ok"], json!(false));
        let text = serde_json::to_string(&v).unwrap();
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert!(text.contains("roughint/1"));
    }
}
