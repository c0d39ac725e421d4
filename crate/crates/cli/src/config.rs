//! Resolved run configurations. Each command starts from defaults, overlays
//! the `--config` file and then the command-line flags; the result is written
//! next to the outputs and can be fed back through `--config`.

use std::fs;
use std::path::{Path, PathBuf};

use linkshrink::eval::{EvalConfig, Method};
use linkshrink::synth::SynthConfig;
use linkshrink::{Error, SamplerConfig, Variant};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub input: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Overrides the schema's response column.
    pub response: Option<String>,
    pub variant: Variant,
    pub level: f64,
    pub standardize_response: bool,
    pub dump_draws: bool,
    pub out: PathBuf,
    pub sampler: SamplerConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            input: None,
            schema: None,
            response: None,
            variant: Variant::Bayint,
            level: 0.95,
            standardize_response: false,
            dump_draws: false,
            out: PathBuf::from("linkshrink-out"),
            sampler: SamplerConfig::default(),
        }
    }
}

/// Shared by `shapley` and `importance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Directory written by `fit --dump-draws`; when absent the model is
    /// fitted in-run from `fit`.
    pub fit_dir: Option<PathBuf>,
    pub fit: FitConfig,
    /// Individuals to explain (defaults to the training input).
    pub test: Option<PathBuf>,
    /// Explain only the first `rows` individuals.
    pub rows: Option<usize>,
    /// Covariates to report (all when empty).
    pub covariates: Vec<String>,
    pub level: f64,
    pub oracle: bool,
    pub out: PathBuf,
    /// importance only: per-individual unit-change effect of this covariate.
    pub unit_effect: Option<String>,
    /// importance only: raw column exported next to the unit effects.
    pub stratify: Option<String>,
    /// importance only: average per-draw |φ| instead of |posterior-mean φ|.
    pub per_draw: bool,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            fit_dir: None,
            fit: FitConfig::default(),
            test: None,
            rows: None,
            covariates: Vec::new(),
            level: 0.95,
            oracle: false,
            out: PathBuf::from("linkshrink-out"),
            unit_effect: None,
            stratify: None,
            per_draw: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub synth: SynthConfig,
    pub out: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { synth: SynthConfig::default(), out: PathBuf::from("linkshrink-out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub eval: EvalConfig,
    pub out: PathBuf,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self { eval: EvalConfig::default(), out: PathBuf::from("linkshrink-out") }
    }
}

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, CliError> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::from(Error::io(path, e)))?;
    toml::from_str(&text).map_err(|e| CliError::usage(format!("config {}: {}", path.display(), e.message())))
}

pub fn save<T: Serialize>(dir: &Path, cfg: &T) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::from(Error::io(dir, e)))?;
    let text = toml::to_string(cfg).map_err(|e| CliError::internal(format!("serializing config: {e}")))?;
    let path = dir.join("resolved_config.toml");
    fs::write(&path, text).map_err(|e| CliError::from(Error::io(&path, e)))
}

pub fn parse_methods(names: &[String]) -> Result<Vec<Method>, CliError> {
    names
        .iter()
        .flat_map(|s| s.split(','))
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<Method>().map_err(CliError::from))
        .collect()
}
