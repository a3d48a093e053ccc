use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::report::{run, ExperimentReport};
use crate::CliError;

pub const THREADS_VAR: &str = "DISPERSE_UC_THREADS";

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub row: usize,
    pub value: Value,
    pub outcome: Result<ExperimentReport, CliError>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

/// Splits a comma-separated list; each item is read as JSON, falling back to
/// a bare string.
pub fn parse_values(csv: &str) -> Result<Vec<Value>, CliError> {
    let values: Vec<Value> = csv
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| serde_json::from_str(s).unwrap_or_else(|_| Value::String(s.to_string())))
        .collect();
    if values.is_empty() {
        return Err(CliError::Config("--values is empty".into()));
    }
    Ok(values)
}

fn thread_cap() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(CliError::Config(format!("{THREADS_VAR} must be a nonnegative integer, got `{s}`"))),
        },
    }
}

pub fn sweep(template: &ExperimentConfig, axis: &str, values: &[Value]) -> Result<SweepReport, CliError> {
    if ["grid", "parameters", "output_path"].contains(&axis) {
        return Err(CliError::Config(format!("sweep axis `{axis}` is not a scalar parameter")));
    }
    if let Some(v) = values.iter().find(|v| v.is_array() || v.is_object()) {
        return Err(CliError::Config(format!("sweep value {v} is not a scalar")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Io(e.to_string()))?;
    let rows = pool.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(row, value)| SweepRow {
                row,
                value: value.clone(),
                outcome: template.with(axis, value.clone()).and_then(|c| run(&c)),
            })
            .collect()
    });
    Ok(SweepReport { axis: axis.to_string(), rows })
}

fn fmt_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl SweepReport {
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.outcome.is_err()) {
            3
        } else if self.rows.iter().all(|r| r.outcome.as_ref().is_ok_and(|r| r.pass)) {
            0
        } else {
            1
        }
    }

    fn reports(&self) -> impl Iterator<Item = &ExperimentReport> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    /// Primary results of the rows that ran.
    pub fn primaries(&self) -> Vec<f64> {
        self.reports().map(|r| r.results[&r.primary]).collect()
    }

    /// `(min, max, max/min)` of a column over the rows that ran.
    fn summary(values: &[f64]) -> Option<(f64, f64, f64)> {
        if values.is_empty() {
            return None;
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((lo, hi, hi / lo))
    }

    pub fn primary_summary(&self) -> Option<(f64, f64, f64)> {
        Self::summary(&self.primaries())
    }

    /// One row per run, then `min`, `max` and `max_over_min` rows over every
    /// numeric column.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let keys: Vec<String> =
            self.reports().flat_map(|r| r.results.keys().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string(), self.axis.clone(), "status".into(), "primary".into()];
        header.extend(keys.iter().cloned());
        header.push("message".into());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.row.to_string(), fmt_value(&r.value)];
            match &r.outcome {
                Ok(rep) => {
                    rec.push(if rep.pass { "pass" } else { "fail" }.into());
                    rec.push(rep.results[&rep.primary].to_string());
                    rec.extend(keys.iter().map(|k| rep.results.get(k).map(f64::to_string).unwrap_or_default()));
                    rec.push(String::new());
                }
                Err(e) => {
                    rec.push("error".into());
                    rec.extend(std::iter::repeat_n(String::new(), keys.len() + 1));
                    rec.push(e.to_string());
                }
            }
            w.write_record(&rec)?;
        }
        let mut columns = vec![self.primaries()];
        for k in &keys {
            columns.push(self.reports().filter_map(|r| r.results.get(k).copied()).collect());
        }
        let stats: Vec<Option<(f64, f64, f64)>> = columns.iter().map(|c| Self::summary(c)).collect();
        for (label, pick) in [("min", 0), ("max", 1), ("max_over_min", 2)] {
            let mut rec = vec![label.to_string(), String::new(), String::new()];
            rec.extend(stats.iter().map(|s| {
                s.map(|(lo, hi, ratio)| [lo, hi, ratio][pick].to_string()).unwrap_or_default()
            }));
            rec.push(String::new());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn values_parse_as_json_with_string_fallback() {
        assert_eq!(parse_values("1, 2.5,-3e-2").unwrap(), vec![json!(1), json!(2.5), json!(-0.03)]);
        assert_eq!(parse_values("plain,corrected").unwrap(), vec![json!("plain"), json!("corrected")]);
        assert!(parse_values(" , ").is_err());
    }

    #[test]
    fn partial_failure_is_recorded_per_row() {
        let t = ExperimentConfig::from_value(json!({"experiment": "subordination", "m": 1})).unwrap();
        let s = sweep(&t, "p_dec", &[json!(2.0), json!(-1.0), json!(1.5)]).unwrap();
        assert!(s.rows[0].outcome.is_ok() && s.rows[2].outcome.is_ok());
        assert!(s.rows[1].outcome.is_err());
        assert_eq!(s.exit_code(), 3);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("row,p_dec,status,primary,band_width,"));
        assert!(lines[0].ends_with(",message"));
        assert!(lines[2].contains("error"));
        assert_eq!(lines.len(), 1 + 3 + 3);
        assert!(lines[6].starts_with("max_over_min,"));
    }

    #[test]
    fn non_scalar_axis_is_rejected() {
        let t = ExperimentConfig::from_value(json!({"experiment": "subordination", "m": 1})).unwrap();
        assert!(sweep(&t, "grid", &[json!(1)]).is_err());
        assert!(sweep(&t, "xs", &[json!([1, 2])]).is_err());
    }
}
