use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::experiments::{dispatch, Series};
use crate::CliError;

pub const ARTIFACT_VERSION: &str = concat!("disperse-uc ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub results: BTreeMap<String, f64>,
    pub tolerance: BTreeMap<String, f64>,
    pub pass: bool,
    /// Key in `results` a sweep summarizes.
    pub primary: String,
    pub wall_time: f64,
    pub artifact_version: String,
}

impl ExperimentReport {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    /// Pretty JSON with keys sorted at every level.
    pub fn to_json(&self) -> Result<String, CliError> {
        // Going through Value sorts the keys (serde_json's map is a BTreeMap).
        let v = serde_json::to_value(self).map_err(|e| CliError::Numerical(e.to_string()))?;
        serde_json::to_string_pretty(&v).map_err(|e| CliError::Numerical(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self, CliError> {
        serde_json::from_str(s).map_err(|e| CliError::Config(format!("report: {e}")))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    run_with_series(cfg).map(|(r, _)| r)
}

pub fn run_with_series(cfg: &ExperimentConfig) -> Result<(ExperimentReport, Series), CliError> {
    let start = Instant::now();
    let out = dispatch(cfg)?;
    if let Some((k, v)) = out.results.iter().find(|(_, v)| !v.is_finite()) {
        return Err(CliError::Numerical(format!("result `{k}` is not finite ({v})")));
    }
    let report = ExperimentReport {
        config: cfg.clone(),
        results: out.results,
        tolerance: out.tolerance,
        pass: out.pass,
        primary: out.primary.to_string(),
        wall_time: start.elapsed().as_secs_f64(),
        artifact_version: ARTIFACT_VERSION.to_string(),
    };
    Ok((report, out.series))
}

pub fn write_series(series: &Series, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&series.header)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
