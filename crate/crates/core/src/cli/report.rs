//! Machine-readable run reports and CSV spectra tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{BetheError, Result};
use crate::linalg::C64;

/// Maximum and mean of the residuals collected by a command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    /// Largest residual, zero when none were collected.
    pub max: f64,
    /// Arithmetic mean, zero when none were collected.
    pub mean: f64,
    /// Number of residuals summarised.
    pub count: usize,
}

impl ResidualSummary {
    /// Summary of a residual list; NaN entries propagate into both fields.
    pub fn of(residuals: &[f64]) -> Self {
        if residuals.is_empty() {
            return ResidualSummary { max: 0.0, mean: 0.0, count: 0 };
        }
        let max = residuals.iter().copied().fold(0.0_f64, |m, r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) });
        let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
        ResidualSummary { max, mean, count: residuals.len() }
    }
}

/// Output of one command run.
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Command name.
    pub command: String,
    /// Canonical echo of the configuration and global options.
    pub config: BTreeMap<String, String>,
    /// Seconds since the Unix epoch at report creation.
    pub timestamp: u64,
    /// Command-specific records in deterministic order.
    pub results: Vec<Value>,
    /// Residual summary over every record.
    pub residual_summary: ResidualSummary,
    /// Notes about resampled or skipped points.
    pub notes: Vec<String>,
    /// Overall verdict; the process exits with 0 iff this is true.
    pub pass: bool,
    /// Spectra rows `(sector, index, value)` for CSV export.
    #[serde(skip)]
    pub spectra: Vec<(usize, usize, C64)>,
}

impl Report {
    /// Empty report for `command` with a current timestamp.
    pub fn new(command: &str, config: BTreeMap<String, String>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Report {
            command: command.to_string(),
            config,
            timestamp,
            results: Vec::new(),
            residual_summary: ResidualSummary::of(&[]),
            notes: Vec::new(),
            pass: true,
            spectra: Vec::new(),
        }
    }

    /// Appends a serialisable record.
    pub fn push<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let value = serde_json::to_value(record).map_err(|e| BetheError::Io(e.to_string()))?;
        self.results.push(value);
        Ok(())
    }

    /// JSON document with every float written with 17 significant digits.
    pub fn to_json(&self) -> Result<String> {
        let mut value = serde_json::to_value(self).map_err(|e| BetheError::Io(e.to_string()))?;
        widen_floats(&mut value);
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| BetheError::Io(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }

    /// Writes the JSON document to `path`.
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| BetheError::Io(format!("{}: {e}", path.display())))
    }

    /// Writes the spectra rows as CSV with header `sector,index,re,im`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| BetheError::Io(e.to_string());
        w.write_record(["sector", "index", "re", "im"]).map_err(io)?;
        for (sector, index, z) in &self.spectra {
            w.write_record([sector.to_string(), index.to_string(), format!("{:.16e}", z.re), format!("{:.16e}", z.im)])
                .map_err(io)?;
        }
        w.flush().map_err(|e| BetheError::Io(e.to_string()))
    }
}

/// Rewrites every non-integer number in `value` with 17 significant digits.
fn widen_floats(value: &mut Value) {
    match value {
        Value::Number(num) => {
            if num.is_u64() || num.is_i64() {
                return;
            }
            if let Some(x) = num.as_f64() {
                if let Ok(wide) = Number::from_str(&format!("{x:.16e}")) {
                    *num = wide;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(widen_floats),
        Value::Object(map) => map.values_mut().for_each(widen_floats),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let mut r = Report::new("test", BTreeMap::new());
        r.push(&serde_json::json!({ "x": 0.1, "k": 3, "z": [1.0, -2.5e-13] })).unwrap();
        let text = r.to_json().unwrap();
        assert!(text.contains("1.0000000000000001e-1") || text.contains("1.0000000000000000e-1"), "{text}");
        assert!(text.contains("\"k\": 3"));
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["results"][0]["x"].as_f64(), Some(0.1));
        let small = &parsed["results"][0]["z"][1];
        assert_eq!(small.as_f64(), Some(-2.5e-13));
        assert_eq!(small.to_string().trim_start_matches('-').split('e').next().unwrap().len(), 18, "{small}");
    }

    #[test]
    fn csv_header_and_rows() {
        let mut r = Report::new("solve", BTreeMap::new());
        r.spectra.push((1, 0, C64::new(0.5, -0.25)));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("sector,index,re,im"));
        assert_eq!(lines.next(), Some("1,0,5.0000000000000000e-1,-2.5000000000000000e-1"));
    }

    #[test]
    fn summary_of_residuals() {
        let s = ResidualSummary::of(&[1e-12, 3e-12]);
        assert_eq!(s.max, 3e-12);
        assert!((s.mean - 2e-12).abs() < 1e-27);
        assert_eq!(ResidualSummary::of(&[]).count, 0);
    }
}
