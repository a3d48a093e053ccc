use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    KernelDecay,
    Sharpness,
    Convexity,
    Subordination,
    ThetaTransfer,
    Treves,
    CarlemanL2,
    MultiplierUniformity,
    FrozenResolvent,
    Vdc,
    Dispersive,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

/// `[half_width, n]` for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec(pub f64, pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub m: u32,
    /// One `[half_width, n]` pair per axis; time first for 2-D experiments.
    #[serde(default)]
    pub grid: Vec<GridSpec>,
    #[serde(default)]
    pub parameters: BTreeMap<String, Value>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
}

const TOP_LEVEL: [&str; 6] = ["experiment", "m", "grid", "parameters", "seed", "output_path"];

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut raw: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{} is not valid JSON: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut raw, o)?;
        }
        Self::from_value(raw)
    }

    pub fn from_value(raw: Value) -> Result<Self, CliError> {
        serde_json::from_value(raw).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Sets `key` to `value`: a top-level field by name, anything else inside
    /// `parameters` (an explicit `parameters.` prefix is accepted).
    pub fn with(&self, key: &str, value: Value) -> Result<Self, CliError> {
        let mut raw = serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))?;
        set_key(&mut raw, key, value)?;
        Self::from_value(raw)
    }

    pub fn params(&self) -> Params<'_> {
        Params { experiment: self.experiment, map: &self.parameters }
    }

    pub fn axis(&self, k: usize) -> Result<GridSpec, CliError> {
        self.grid.get(k).copied().ok_or_else(|| {
            CliError::Config(format!(
                "missing key `grid`: {} needs {} [half_width, n] pair(s), got {}",
                self.experiment,
                k + 1,
                self.grid.len()
            ))
        })
    }
}

/// Parses `key=value`; the value is read as JSON and falls back to a string.
pub fn apply_override(raw: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
    set_key(raw, key.trim(), value)
}

fn set_key(raw: &mut Value, key: &str, value: Value) -> Result<(), CliError> {
    let obj = raw.as_object_mut().ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;
    if TOP_LEVEL.contains(&key) {
        obj.insert(key.to_string(), value);
        return Ok(());
    }
    let name = key.strip_prefix("parameters.").unwrap_or(key);
    if name.is_empty() {
        return Err(CliError::Config("empty parameter name".into()));
    }
    let params = obj.entry("parameters").or_insert_with(|| Value::Object(Default::default()));
    params
        .as_object_mut()
        .ok_or_else(|| CliError::Config("`parameters` must be an object".into()))?
        .insert(name.to_string(), value);
    Ok(())
}

/// Typed access to the experiment-specific parameters with key-naming errors.
pub struct Params<'a> {
    experiment: Experiment,
    map: &'a BTreeMap<String, Value>,
}

impl Params<'_> {
    fn bad(&self, key: &str, want: &str) -> CliError {
        CliError::Config(format!("parameter `{key}` of {} must be {want}", self.experiment))
    }

    fn missing(&self, key: &str) -> CliError {
        CliError::Config(format!("missing key `{key}` (required by {})", self.experiment))
    }

    pub fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| self.bad(key, "a number")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().map(|n| n as usize).ok_or_else(|| self.bad(key, "a nonnegative integer")),
        }
    }

    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| self.bad(key, "a list of numbers")))
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(self.bad(key, "a list of numbers")),
        }
    }

    pub fn req_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.list(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn req_pair(&self, key: &str) -> Result<(f64, f64), CliError> {
        match self.req_list(key)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(self.bad(key, "a pair [lo, hi]")),
        }
    }

    pub fn str_or<'s>(&'s self, key: &str, default: &'s str) -> Result<&'s str, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| self.bad(key, "a string")),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| self.bad(key, "true or false")),
        }
    }
}
