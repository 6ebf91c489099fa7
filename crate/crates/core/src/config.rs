//! Run configuration files for the CLI.
//!
//! ```json
//! {
//!   "scale": "desk",
//!   "experiment": {"example": "log_ls", "seed": 7},
//!   "solver": {"tol": 1e-4},
//!   "solvers": [{"algo": "bpiree"}, {"algo": "irl1", "overrides": {"max_iter": 5000}}],
//!   "output": {"report": "report.json"}
//! }
//! ```
//!
//! Unknown keys are rejected everywhere. `--set a.b=v` overrides are applied
//! to the JSON tree before it is typed, so they are validated the same way.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::algo::Algorithm;
use crate::error::{Error, Result};
use crate::experiments::{default_lineup, ExperimentSpec, ResolvedSpec, Scale, SolverRun};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub algo: Algorithm,
    /// Fields patched over the shared `solver` section for this solver only.
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub overrides: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<PathBuf>,
    /// Store `A` as a little-endian float64 blob next to the instance JSON.
    pub blob: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    pub include_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scale: Scale,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub solvers: Vec<SolverEntry>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line adjustments applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scale: Option<Scale>,
    /// `key=value` pairs with dotted keys; values parse as JSON, else as strings.
    pub set: Vec<String>,
}

fn typed<T: DeserializeOwned>(value: Value, what: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            Error::Parse(format!("{what}: {}", e.inner()))
        } else {
            Error::Parse(format!("{what} field '{path}': {}", e.inner()))
        }
    })
}

/// Set `root[a][b]... = value` for the dotted key, creating objects on the way.
pub fn apply_set(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("--set expects key=value, got '{assignment}'")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Parse(format!("--set key '{key}' has an empty component")));
    }
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::Parse(format!("--set {key}: '{}' is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = obj.entry(*part).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("split always yields at least one part")
}

impl RunConfig {
    pub fn from_json(text: &str, overrides: &Overrides) -> Result<Self> {
        let mut value: Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config is not valid JSON: {e}")))?;
        if !value.is_object() {
            return Err(Error::Parse("config must be a JSON object".into()));
        }
        for s in &overrides.set {
            apply_set(&mut value, s)?;
        }
        if let Some(seed) = overrides.seed {
            apply_set(&mut value, &format!("experiment.seed={seed}"))?;
        }
        if let Some(scale) = overrides.scale {
            let name = serde_json::to_string(&scale).expect("scale serialises");
            apply_set(&mut value, &format!("scale={name}"))?;
        }
        let config: RunConfig = typed(value, "config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, overrides)
    }

    pub fn resolved(&self) -> Result<ResolvedSpec> {
        self.experiment.resolve(self.scale)
    }

    /// Shared solver settings with the given per-solver patch applied.
    pub fn solver_config(&self, patch: &Map<String, Value>) -> Result<SolverConfig> {
        let mut base = serde_json::to_value(&self.solver).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = base.as_object_mut().expect("solver config is an object");
        for (k, v) in patch {
            obj.insert(k.clone(), v.clone());
        }
        typed(base, "solver overrides")
    }

    /// Solver settings for a single-algorithm run: the shared section patched
    /// with the first matching entry of `solvers`, if any.
    pub fn config_for(&self, algo: Algorithm) -> Result<SolverConfig> {
        match self.solvers.iter().find(|s| s.algo == algo) {
            Some(entry) => self.solver_config(&entry.overrides),
            None => Ok(self.solver.clone()),
        }
    }

    /// The comparison line-up; the family default (see
    /// [`default_lineup`]) when `solvers` is empty.
    pub fn solver_runs(&self) -> Result<Vec<SolverRun>> {
        if self.solvers.is_empty() {
            return Ok(default_lineup(self.experiment.example, &self.solver));
        }
        self.solvers.iter().map(|s| Ok(SolverRun { algo: s.algo, config: self.solver_config(&s.overrides)? })).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let spec = self.resolved()?;
        let m = spec.m;
        self.solver.validate(m)?;
        for run in self.solver_runs()? {
            run.config.validate(m)?;
        }
        Ok(())
    }
}
