use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Output envelope of the report-producing commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub seed: u64,
    pub results: Value,
    pub version: String,
}

impl Report {
    pub fn new<C: Serialize, R: Serialize>(command: &str, config: &C, seed: u64, results: &R) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            config: to_value(config)?,
            seed,
            results: to_value(results)?,
            version: VERSION.to_string(),
        })
    }

    /// Pretty JSON with object keys in sorted order, newline-terminated.
    pub fn to_bytes(&self) -> Vec<u8> {
        // serde_json's Map is a BTreeMap here, so going through Value sorts keys.
        let v = serde_json::to_value(self).expect("report is plain JSON");
        let mut s = serde_json::to_string_pretty(&v).expect("report is plain JSON");
        s.push('\n');
        s.into_bytes()
    }
}

// Non-finite floats have no JSON form; serde_json turns them into null.
fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| CliError::numeric(format!("cannot encode report: {e}")))
}

pub fn write_report(r: &Report, path: &Path) -> Result<()> {
    fs::write(path, r.to_bytes()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_sorted_and_round_trip() {
        let r = Report::new("demo", &serde_json::json!({"b": 1, "a": 2}), 3, &vec![1.5, 2.0]).unwrap();
        let text = String::from_utf8(r.to_bytes()).unwrap();
        let keys: Vec<usize> = ["\"command\"", "\"config\"", "\"results\"", "\"seed\"", "\"version\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        let back: Report = serde_json::from_slice(&r.to_bytes()).unwrap();
        assert_eq!(back, r);
    }
}
