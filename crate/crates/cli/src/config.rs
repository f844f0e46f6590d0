//! Run configuration: a TOML (or JSON) file with one section per module,
//! overlaid by command-line overrides.

use std::path::Path;

use ddhit::experiment::{DiffusionSettings, Engine, ExperimentConfig};
use ddhit::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelConfig,
    pub experiment: ExperimentSection,
    pub diffusion: DiffusionSettings,
    pub fluid: FluidSection,
    pub oracle: OracleSection,
    pub check: CheckSection,
}

impl Default for FileConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::birth_death_example(),
            experiment: ExperimentSection::default(),
            diffusion: DiffusionSettings::default(),
            fluid: FluidSection::default(),
            oracle: OracleSection::default(),
            check: CheckSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub n: u64,
    pub r: f64,
    pub replicas: u64,
    pub alpha: f64,
    pub t_grid: Vec<f64>,
    pub master_seed: u64,
    pub engine: Engine,
    pub t_max_multiplier: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let e = ExperimentConfig::birth_death_example();
        Self {
            n: e.n,
            r: e.r,
            replicas: e.replicas,
            alpha: e.alpha,
            t_grid: e.t_grid,
            master_seed: e.master_seed,
            engine: e.engine,
            t_max_multiplier: e.t_max_multiplier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FluidSection {
    /// Relative tolerance of τ_r and of the fluid solve.
    pub tol: f64,
    /// Uniform output points; 0 writes the ODE nodes.
    pub points: usize,
}

impl Default for FluidSection {
    fn default() -> Self {
        Self { tol: 1e-10, points: 201 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub n: u64,
    /// End of the survival grid; defaults to 4 τ_r.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub points: usize,
    pub replicas: u64,
    pub absorb_zero: bool,
    /// Confidence parameter of the DKW band.
    pub dkw_alpha: f64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            n: 20,
            t_end: None,
            points: 41,
            replicas: 10_000,
            absorb_zero: false,
            dkw_alpha: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// Levels in (x, r] at which the variance identity is checked.
    pub levels: usize,
    /// Horizon/endpoint pairs for the variational check.
    pub paths: usize,
    pub identity_tol: f64,
    pub variational_tol: f64,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            levels: 10,
            paths: 6,
            identity_tol: 1e-8,
            variational_tol: 1e-6,
        }
    }
}

impl FileConfig {
    pub fn experiment_config(&self) -> ExperimentConfig {
        let e = &self.experiment;
        ExperimentConfig {
            model: self.model.clone(),
            n: e.n,
            alpha: e.alpha,
            r: e.r,
            t_grid: e.t_grid.clone(),
            replicas: e.replicas,
            master_seed: e.master_seed,
            engine: e.engine,
            t_max_multiplier: e.t_max_multiplier,
            diffusion: self.diffusion,
        }
    }
}

/// Reads a config file into a TOML table. A run manifest is accepted too;
/// its `config` entry is used.
pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let mut v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if v.get("command").is_some() {
            if let Some(inner) = v.get_mut("config").map(serde_json::Value::take) {
                v = inner;
            }
        }
        strip_nulls(&mut v);
        match toml::Value::try_from(v) {
            Ok(toml::Value::Table(t)) => Ok(t),
            Ok(_) => Err(CliError::Config("config root must be an object".into())),
            Err(e) => Err(CliError::Config(e.to_string())),
        }
    } else {
        text.parse::<toml::Table>()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn strip_nulls(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Object(m) => {
            m.retain(|_, x| !x.is_null());
            m.values_mut().for_each(strip_nulls);
        }
        serde_json::Value::Array(a) => a.iter_mut().for_each(strip_nulls),
        _ => {}
    }
}

/// Applies `section.key=value`. The value is parsed as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not key=value")))?;
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    set_path(table, key.trim(), value)
}

pub fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{key}` is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn resolve(table: toml::Table) -> Result<FileConfig, CliError> {
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_gives_birth_death_example() {
        let c = resolve(toml::Table::new()).unwrap();
        assert_eq!(c.experiment_config(), ExperimentConfig::birth_death_example());
    }

    #[test]
    fn overrides_parse_literals_and_nest() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "experiment.n=200").unwrap();
        apply_override(&mut t, "experiment.t_grid=[0.0, 0.5]").unwrap();
        apply_override(&mut t, "experiment.engine=diffusion").unwrap();
        apply_override(&mut t, "diffusion.dt=1e-3").unwrap();
        let c = resolve(t).unwrap();
        assert_eq!(c.experiment.n, 200);
        assert_eq!(c.experiment.t_grid, vec![0.0, 0.5]);
        assert_eq!(c.experiment.engine, Engine::Diffusion);
        assert_eq!(c.diffusion.dt, Some(1e-3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "experiment.nn=3").unwrap();
        assert!(matches!(resolve(t), Err(CliError::Config(_))));
        assert!(apply_override(&mut toml::Table::new(), "novalue").is_err());
    }

    #[test]
    fn resolved_config_roundtrips_through_json() {
        let c = FileConfig::default();
        let mut v = serde_json::to_value(&c).unwrap();
        strip_nulls(&mut v);
        let t = match toml::Value::try_from(v).unwrap() {
            toml::Value::Table(t) => t,
            _ => unreachable!(),
        };
        assert_eq!(resolve(t).unwrap(), c);
    }
}
