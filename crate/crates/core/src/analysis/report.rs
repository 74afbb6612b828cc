use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{invalid, Result};

/// Machine-readable outcome of a study. Maps are ordered so serialization is deterministic.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub study: String,
    pub params: BTreeMap<String, Value>,
    pub probes: Vec<Value>,
    pub values: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, bool>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

impl StudyReport {
    pub fn new(study: impl Into<String>) -> Self {
        Self {
            study: study.into(),
            ..Self::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.params.insert(key.to_string(), to_value(value));
        self
    }

    pub fn value(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.values.insert(key.to_string(), to_value(value));
        self
    }

    pub fn verdict(&mut self, key: &str, passed: bool) -> &mut Self {
        self.verdicts.insert(key.to_string(), passed);
        self
    }

    pub fn tolerance(&mut self, key: &str, tol: f64) -> &mut Self {
        self.tolerances.insert(key.to_string(), tol);
        self
    }

    /// True when every verdict passed.
    pub fn passed(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(format!("report serialization: {e}")))
    }

    pub fn write_json(&self, mut out: impl Write) -> Result<()> {
        out.write_all(self.to_json()?.as_bytes())?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}
