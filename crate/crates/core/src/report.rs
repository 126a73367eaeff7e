//! Pass/fail checks and report emission.
//!
//! JSON maps are `BTreeMap`-backed so key order, and therefore output bytes,
//! depend only on the report contents.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// A measured defect compared against a tolerance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    /// Passes when `value ≤ tolerance`; NaN never passes.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// Passes when |value − target| ≤ tolerance; `value` is stored as reported.
    pub fn near(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: (value - target).abs() <= tolerance,
        }
    }

    /// Passes when `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance: bound,
            pass: value >= bound,
        }
    }

    /// Boolean check recorded as value 0 (holds) or 1 (fails).
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: ok,
        }
    }
}

pub fn all_pass(checks: &[CheckResult]) -> bool {
    checks.iter().all(|c| c.pass)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub params: Value,
    pub results: Value,
    pub tolerances: BTreeMap<String, f64>,
    pub pass: bool,
}

impl Report {
    /// Checks are appended to `results` under "checks"; `pass` is their conjunction.
    pub fn new(
        command: &str,
        params: Value,
        results: Value,
        checks: Vec<CheckResult>,
    ) -> Result<Self> {
        let tolerances = checks
            .iter()
            .map(|c| (c.name.clone(), c.tolerance))
            .collect();
        let pass = all_pass(&checks);
        let mut results = match results {
            Value::Object(map) => map,
            Value::Null => serde_json::Map::new(),
            other => {
                let mut map = serde_json::Map::new();
                map.insert("value".into(), other);
                map
            }
        };
        results.insert("checks".into(), to_value(&checks)?);
        Ok(Self {
            command: command.to_string(),
            params,
            results: Value::Object(results),
            tolerances,
            pass,
        })
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        out.push(b'\n');
        Ok(out)
    }
}

pub fn to_value<T: Serialize>(data: &T) -> Result<Value> {
    serde_json::to_value(data).map_err(|e| Error::Io(e.to_string()))
}

/// CSV with a header row taken from the first record's field names.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Error::Io(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| Error::Io(e.to_string()))
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn pass_flag_aggregates_checks() {
        let ok = Report::new(
            "x",
            json!({}),
            json!({}),
            vec![CheckResult::at_most("a", 1e-15, 1e-13)],
        )
        .unwrap();
        assert!(ok.pass);
        let bad = Report::new(
            "x",
            json!({}),
            json!({}),
            vec![
                CheckResult::at_most("a", 1e-15, 1e-13),
                CheckResult::at_most("b", 1e-3, 1e-13),
            ],
        )
        .unwrap();
        assert!(!bad.pass);
        assert_eq!(bad.tolerances["b"], 1e-13);
        assert!(!CheckResult::at_most("nan", f64::NAN, 1.0).pass);
    }

    #[test]
    fn json_is_stable() {
        let make = || {
            Report::new(
                "budget",
                json!({"nc": 82.0, "a": 1}),
                json!({"z": 1, "b": [1, 2]}),
                vec![],
            )
            .unwrap()
            .to_json()
            .unwrap()
        };
        let a = make();
        assert_eq!(a, make());
        let text = String::from_utf8(a).unwrap();
        assert!(text.find("\"a\"").unwrap() < text.find("\"nc\"").unwrap());
    }

    #[derive(Serialize)]
    struct Row {
        family: &'static str,
        w: u32,
        mean_excitation: f64,
    }

    #[test]
    fn csv_has_header() {
        let bytes = to_csv(&[Row {
            family: "ext-bin",
            w: 1,
            mean_excitation: 2.0,
        }])
        .unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "family,w,mean_excitation\next-bin,1,2.0\n"
        );
    }
}
