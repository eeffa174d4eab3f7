//! Experiment configuration files.
//!
//! A config is a JSON object with the fields of [`ExperimentConfig`]; powers
//! are given in dBm. The MCS table can be inlined under `mcs` or read from a
//! whitespace separated text file named by `mcs_table_file` (relative paths
//! resolve against the config's directory).

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use ulofdma_core::{ExperimentConfig, McsTable, PolicyKind};

use crate::CliError;

const MCS_FILE_KEY: &str = "mcs_table_file";

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}

pub fn parse(text: &str, base_dir: &Path) -> Result<ExperimentConfig, CliError> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed config: {e}")))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| CliError::Config("config must be a JSON object".into()))?;

    let mcs_file = match obj.remove(MCS_FILE_KEY) {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => return Err(CliError::Config(format!("{MCS_FILE_KEY} must be a string, got {other}"))),
    };
    if mcs_file.is_some() && obj.contains_key("mcs") {
        return Err(CliError::Config(format!("give either mcs or {MCS_FILE_KEY}, not both")));
    }

    let mut cfg: ExperimentConfig =
        serde_json::from_value(value).map_err(|e| CliError::Config(format!("invalid config: {e}")))?;
    if let Some(rel) = mcs_file {
        let path = if rel.is_absolute() { rel } else { base_dir.join(rel) };
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read MCS table {}: {e}", path.display())))?;
        cfg.mcs = McsTable::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(cfg)
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub policies: Option<Vec<PolicyKind>>,
    pub epochs: Option<usize>,
    pub topologies: Option<usize>,
    pub stations: Option<usize>,
    pub k_values: Option<Vec<usize>>,
    pub v: Option<f64>,
    pub checks: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = &self.policies {
            cfg.policies = p.clone();
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(t) = self.topologies {
            cfg.topologies = t;
        }
        if let Some(k) = self.stations {
            cfg.stations = k;
        }
        if let Some(ks) = &self.k_values {
            cfg.k_values = ks.clone();
        }
        if let Some(v) = self.v {
            cfg.constraints.v = v;
        }
        cfg.checks |= self.checks;
    }
}

/// Pretty JSON of the fully resolved config, MCS table inlined.
pub fn to_json(cfg: &ExperimentConfig) -> String {
    let mut s = serde_json::to_string_pretty(cfg).expect("config serializes");
    s.push('\n');
    s
}
