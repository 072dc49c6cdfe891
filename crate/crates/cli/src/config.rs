//! Run configuration: TOML file, `--section.key=value` overrides, validation
//! and sweep expansion.

use std::path::{Path, PathBuf};

use ethdyn::engine::{EngineConfig, Propagator};
use ethdyn::estimator::EstimatorConfig;
use ethdyn::funcfilter::FilterConfig;
use ethdyn::model::ModelSpec;
use ethdyn::moddyn::ModConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid override {0:?}: expected --section.key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn default_realizations() -> usize {
    10
}

fn default_e_centers() -> Vec<f64> {
    (-4..=4).map(|k| 0.5 * k as f64).collect()
}

/// Lists swept over; absent lists keep the model value, empty lists yield
/// no points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_left: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j_c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<f64>>,
    /// Explicit disorder seeds; otherwise `disorder_realizations` seeds
    /// counting up from the model's `disorder_seed` when `W > 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder_seeds: Option<Vec<u64>>,
    #[serde(default = "default_realizations")]
    pub disorder_realizations: usize,
    /// Window centers of equipartition curves.
    #[serde(default = "default_e_centers")]
    pub e_centers: Vec<f64>,
    /// Random MOD states per sign in relaxation runs.
    #[serde(default = "default_mod_seeds")]
    pub mod_seeds: usize,
}

fn default_mod_seeds() -> usize {
    1
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_left: None,
            j_c: None,
            delta: None,
            w: None,
            disorder_seeds: None,
            disorder_realizations: default_realizations(),
            e_centers: default_e_centers(),
            mod_seeds: default_mod_seeds(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    /// JSON records plus CSV tables for curves and traces.
    #[default]
    #[serde(rename = "json+csv")]
    JsonCsv,
    /// JSON records only.
    #[serde(rename = "json")]
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(rename = "mod", default)]
    pub mod_cfg: ModConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Applies `section.key=value` to a TOML table; the value is read as a TOML
/// literal and falls back to a plain string.
pub fn apply_override(table: &mut toml::Table, raw: &str) -> Result<(), ConfigError> {
    let body = raw.trim_start_matches("--");
    let (path, value) = body.split_once('=').ok_or_else(|| ConfigError::Override(raw.into()))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.len() < 2 || keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(raw.into()));
    }
    let value = match toml::from_str::<toml::Table>(&format!("v = {value}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let mut cursor = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cursor
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| ConfigError::Override(raw.into()))?;
    }
    cursor.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: ethdyn::Error| ConfigError::Invalid(e.to_string());
        for spec in self.model_points() {
            spec.validate().map_err(invalid)?;
        }
        self.model.validate().map_err(invalid)?;
        self.estimator.validate().map_err(invalid)?;
        self.mod_cfg.validate().map_err(invalid)?;
        if !(self.filter.sigma > 0.0) || !(self.filter.cheb_tol > 0.0) {
            return Err(ConfigError::Invalid("filter sigma and cheb_tol must be positive".into()));
        }
        if let Some(dt) = self.engine.dt_override {
            if !(dt > 0.0) {
                return Err(ConfigError::Invalid(format!("dt_override must be positive, got {dt}")));
            }
        }
        if let Some(r) = self.engine.renormalize_interval {
            if !(r > 0.0) {
                return Err(ConfigError::Invalid(format!("renormalize_interval must be positive, got {r}")));
            }
        }
        if let Propagator::Chebyshev { tol } = self.engine.propagator {
            if !(tol > 0.0) {
                return Err(ConfigError::Invalid(format!("propagator tol must be positive, got {tol}")));
            }
        }
        if self.engine.power_iter_cap < 10 {
            return Err(ConfigError::Invalid("power_iter_cap must be at least 10".into()));
        }
        if self.sweep.disorder_realizations == 0 || self.sweep.mod_seeds == 0 {
            return Err(ConfigError::Invalid("disorder_realizations and mod_seeds must be positive".into()));
        }
        Ok(())
    }

    /// Cartesian product of the sweep lists, without disorder expansion.
    pub fn model_points(&self) -> Vec<ModelSpec> {
        let m = &self.model;
        let n_left = self.sweep.n_left.clone().unwrap_or_else(|| vec![m.n_left]);
        let j_c = self.sweep.j_c.clone().unwrap_or_else(|| vec![m.j_c]);
        let delta = self.sweep.delta.clone().unwrap_or_else(|| vec![m.delta]);
        let w = self.sweep.w.clone().unwrap_or_else(|| vec![m.w]);
        let mut out = Vec::new();
        for &n in &n_left {
            for &jc in &j_c {
                for &d in &delta {
                    for &wv in &w {
                        let mut spec = m.clone();
                        spec.n_left = n;
                        // a fixed n_right does not follow n_left through a sweep
                        if self.sweep.n_left.is_some() {
                            spec.n_right = None;
                        }
                        spec.j_c = jc;
                        spec.delta = d;
                        spec.w = wv;
                        out.push(spec);
                    }
                }
            }
        }
        out
    }

    /// Disorder seeds of one sweep point; a clean model has one realization.
    pub fn realization_seeds(&self, spec: &ModelSpec) -> Vec<u64> {
        if spec.w == 0.0 {
            return vec![spec.disorder_seed];
        }
        match &self.sweep.disorder_seeds {
            Some(seeds) => seeds.clone(),
            None => (0..self.sweep.disorder_realizations as u64)
                .map(|k| spec.disorder_seed.wrapping_add(k))
                .collect(),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        hash_json(&serde_json::to_value(self).expect("config serializes"))
    }
}

pub fn hash_json(v: &serde_json::Value) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(v).expect("json serializes"));
    hex::encode(h.finalize())
}
