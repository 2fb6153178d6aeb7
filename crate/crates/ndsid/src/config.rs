//! Experiment configuration document (JSON). One config drives every
//! subcommand; individual CLI flags override single keys.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    /// Required for chain models; optional for model files that embed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorDoc>,
    pub schedule: ScheduleConfig,
    /// Measurement noise variance (the standard deviation is its root).
    pub noise_variance: f64,
    /// Settling-time override; computed from the eigenvalues when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_settle: Option<f64>,
    /// Decay level defining the computed settling bound.
    #[serde(default = "default_settle_fraction")]
    pub settle_fraction: f64,
    /// Ascending steady-sample counts for convergence curves and sweeps.
    pub sample_sweep: Vec<usize>,
    #[serde(default = "default_trials")]
    pub monte_carlo_trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub stage1: Stage1Config,
    #[serde(default)]
    pub nls: NlsConfig,
    /// SVD rank tolerance override for the null-space projections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

fn default_settle_fraction() -> f64 {
    1e-3
}

fn default_trials() -> usize {
    50
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// Build the spring-mass-damper benchmark chain.
    Chain(ChainConfig),
    /// Load a model document.
    File(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_carts: usize,
    #[serde(default = "default_mass_range")]
    pub mass_range: (f64, f64),
    #[serde(default = "default_spring_range")]
    pub spring_range: (f64, f64),
    #[serde(default = "default_damper_range")]
    pub damper_range: (f64, f64),
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unknown_coupling: Option<usize>,
    #[serde(default = "default_true")]
    pub wall_anchoring: bool,
    #[serde(default = "default_true")]
    pub split_forces: bool,
    pub seed: u64,
}

fn default_mass_range() -> (f64, f64) {
    (1.0, 1.5)
}
fn default_spring_range() -> (f64, f64) {
    (0.5, 2.0)
}
fn default_damper_range() -> (f64, f64) {
    (0.1, 0.5)
}
fn default_true() -> bool {
    true
}

impl ChainConfig {
    pub fn to_spec(&self) -> ndsid_core::chain::ChainSpec {
        ndsid_core::chain::ChainSpec {
            n_carts: self.n_carts,
            mass_range: self.mass_range,
            spring_range: self.spring_range,
            damper_range: self.damper_range,
            unknown_coupling: self.unknown_coupling,
            wall_anchoring: self.wall_anchoring,
            split_forces: self.split_forces,
            seed: self.seed,
        }
    }
}

/// Generator matrices as row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GeneratorDoc {
    pub xi: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub xi0: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    #[serde(default)]
    pub t_start: f64,
    /// Window end; derived from the sample sweep when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub interval_min: f64,
    pub interval_max: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Stage1Method {
    Batch,
    Rls,
    Both,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Stage1Config {
    #[serde(default = "default_method")]
    pub method: Stage1Method,
    #[serde(default = "default_p0_scale")]
    pub p0_scale: f64,
}

fn default_method() -> Stage1Method {
    Stage1Method::Batch
}
fn default_p0_scale() -> f64 {
    1e8
}

impl Default for Stage1Config {
    fn default() -> Self {
        Stage1Config {
            method: Stage1Method::Batch,
            p0_scale: 1e8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NlsConfig {
    #[serde(default)]
    pub enabled: bool,
    /// Relative error magnitudes of the random initial guesses.
    #[serde(default = "default_init_levels")]
    pub init_error_levels: Vec<f64>,
    /// Random restarts per level; the best final error is kept.
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_init_levels() -> Vec<f64> {
    (1..=10).map(|k| 0.05 * k as f64).collect()
}
fn default_restarts() -> usize {
    5
}
fn default_max_iterations() -> usize {
    100
}

impl Default for NlsConfig {
    fn default() -> Self {
        NlsConfig {
            enabled: false,
            init_error_levels: default_init_levels(),
            restarts: default_restarts(),
            max_iterations: default_max_iterations(),
        }
    }
}

/// A parsed config plus the SHA-256 of its source bytes; every report embeds
/// the hash so outputs are traceable to their exact configuration.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub hash: String,
    pub base_dir: PathBuf,
}

pub fn load_config(path: &Path) -> AppResult<LoadedConfig> {
    let bytes = fs::read(path)
        .map_err(|e| AppError::input(format!("cannot read config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_slice(&bytes)
        .map_err(|e| AppError::input(format!("cannot parse config {}: {e}", path.display())))?;
    validate(&config)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let hash = hex::encode(hasher.finalize());
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig {
        config,
        hash,
        base_dir,
    })
}

pub fn validate(config: &ExperimentConfig) -> AppResult<()> {
    if config.noise_variance < 0.0 {
        return Err(AppError::input("noise_variance must be nonnegative"));
    }
    if !config.sample_sweep.windows(2).all(|w| w[0] < w[1]) {
        return Err(AppError::input("sample_sweep must be strictly ascending"));
    }
    if config.sample_sweep.is_empty() {
        return Err(AppError::input("sample_sweep must not be empty"));
    }
    if config.schedule.interval_min <= 0.0
        || config.schedule.interval_max < config.schedule.interval_min
    {
        return Err(AppError::input("invalid schedule intervals"));
    }
    if let Some(t_end) = config.schedule.t_end {
        if t_end <= config.schedule.t_start {
            return Err(AppError::input("schedule window is empty"));
        }
    }
    if matches!(config.model, ModelSource::Chain(_)) && config.generator.is_none() {
        return Err(AppError::input("chain models need an explicit generator"));
    }
    if config.nls.enabled {
        if config.nls.restarts == 0 {
            return Err(AppError::input("nls.restarts must be positive"));
        }
        if config
            .nls
            .init_error_levels
            .iter()
            .any(|&l| !(l > 0.0) || !l.is_finite())
        {
            return Err(AppError::input("nls.init_error_levels must be positive"));
        }
    }
    Ok(())
}
