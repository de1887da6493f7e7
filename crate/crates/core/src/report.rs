//! Experiment reporting: named statistics with full provenance, serialized
//! as deterministic JSON (keys sorted, no timestamps).

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub statistics: BTreeMap<String, f64>,
    pub pass: bool,
    /// Echo of the configuration that produced the report.
    pub config: serde_json::Value,
    /// Free-form provenance: truncation levels, tolerances, caveats.
    pub notes: Vec<String>,
    /// Raw sample sets for optional CSV dumps; not part of the JSON body.
    #[serde(skip)]
    pub samples: BTreeMap<String, Vec<f64>>,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>, config: serde_json::Value) -> Self {
        ExperimentReport {
            name: name.into(),
            statistics: BTreeMap::new(),
            pass: true,
            config,
            notes: Vec::new(),
            samples: BTreeMap::new(),
        }
    }

    /// Attach a named sample set for downstream CSV dumps.
    pub fn attach_samples(&mut self, key: impl Into<String>, values: Vec<f64>) -> &mut Self {
        self.samples.insert(key.into(), values);
        self
    }

    /// Two-column CSV (`label,value`) of all attached sample sets.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("label,value\n");
        for (label, values) in &self.samples {
            for v in values {
                out.push_str(&format!("{label},{v}\n"));
            }
        }
        out
    }

    pub fn stat(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.statistics.insert(key.into(), value);
        self
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.statistics.get(key).copied()
    }

    /// Record a named check: stores the value and folds the condition into
    /// the overall pass flag.
    pub fn check(&mut self, key: impl Into<String>, value: f64, ok: bool) -> &mut Self {
        let key = key.into();
        self.statistics.insert(key.clone(), value);
        if !ok {
            self.notes.push(format!("check failed: {key}"));
            self.pass = false;
        }
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
