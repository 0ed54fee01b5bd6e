//! Experiment and scenario files (TOML).

use std::fs;
use std::path::{Path, PathBuf};

use musiclab_core::quality::DEFAULT_SAMPLE_SIZE;
use musiclab_core::scenarios::{ScenarioKind, ScenarioSpec};
use musiclab_core::{Market, PolicySpec, SimulationConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// How a generated scenario file was produced. Informational only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationMetadata {
    pub kind: String,
    pub n: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
}

/// A scenario on disk: the spec plus optional generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<GenerationMetadata>,
    pub scenario: ScenarioSpec,
}

impl ScenarioFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario files serialize")
    }

    /// Generates `spec` and stores the result as literal vectors.
    pub fn generated(spec: &ScenarioSpec) -> musiclab_core::Result<Self> {
        let metadata = match &spec.songs {
            ScenarioKind::GaussianIndependent { n, seed } => Some(GenerationMetadata {
                kind: "gaussian-independent".into(),
                n: *n,
                seed: *seed,
                jitter: None,
            }),
            ScenarioKind::NegativeCorrelation { n, seed, jitter } => Some(GenerationMetadata {
                kind: "negative-correlation".into(),
                n: *n,
                seed: *seed,
                jitter: Some(*jitter),
            }),
            ScenarioKind::Explicit { .. } => None,
        };
        Ok(Self {
            metadata,
            scenario: spec.to_explicit()?,
        })
    }
}

fn default_iterations() -> u64 {
    20_000
}

fn default_refresh_rate() -> u64 {
    1
}

fn default_worlds() -> u64 {
    400
}

fn default_stride() -> u64 {
    100
}

fn default_sample_size() -> u32 {
    DEFAULT_SAMPLE_SIZE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_iterations")]
    pub n_iterations: u64,
    #[serde(default = "default_refresh_rate")]
    pub refresh_rate: u64,
    #[serde(default = "default_worlds")]
    pub n_worlds: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_stride")]
    pub record_stride: u64,
    #[serde(default = "default_sample_size")]
    pub initial_sample_size: u32,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_iterations: default_iterations(),
            refresh_rate: default_refresh_rate(),
            n_worlds: default_worlds(),
            master_seed: 0,
            record_stride: default_stride(),
            initial_sample_size: default_sample_size(),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Per-world trace CSVs.
    #[serde(default = "yes")]
    pub traces: bool,
    /// Metric and plot-data CSVs under `metrics/`.
    #[serde(default)]
    pub metrics: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            traces: true,
            metrics: false,
        }
    }
}

/// Experiment file. The scenario is given inline or as a path relative to
/// the experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_file: Option<PathBuf>,
    #[serde(default)]
    pub simulation: SimulationSection,
    pub policy: PolicySpec,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub scenario: ScenarioSpec,
    pub market: Market,
    pub simulation: SimulationConfig,
    pub output: OutputSection,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::config(path, e))
    }

    /// Resolves the scenario and checks every parameter. `origin` is the
    /// experiment file, used for error messages and relative paths.
    pub fn resolve(&self, origin: &Path) -> Result<Experiment> {
        let scenario = match (&self.scenario, &self.scenario_file) {
            (Some(spec), None) => spec.clone(),
            (None, Some(file)) => {
                let file = origin.parent().unwrap_or(Path::new("")).join(file);
                ScenarioFile::load(&file)?.scenario
            }
            _ => {
                return Err(CliError::config(
                    origin,
                    "exactly one of `scenario` and `scenario_file` is required",
                ))
            }
        };
        let market = scenario.build().map_err(|e| CliError::config(origin, e))?;
        let s = &self.simulation;
        let simulation = SimulationConfig {
            n_iterations: s.n_iterations,
            refresh_rate: s.refresh_rate,
            policy: self.policy,
            n_worlds: s.n_worlds,
            master_seed: s.master_seed,
            record_stride: s.record_stride,
            initial_sample_size: s.initial_sample_size,
        };
        simulation.validate().map_err(|e| CliError::config(origin, e))?;
        Ok(Experiment {
            scenario,
            market,
            simulation,
            output: self.output.clone(),
        })
    }
}
