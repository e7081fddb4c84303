//! JSON configuration for training and benchmarking runs.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::MixupSpec;
use crate::baselines::{Baseline, BaselineConfig};
use crate::error::{Error, Result};
use crate::forecast::levels_with_intervals;
use crate::metrics::DmLoss;
use crate::model::sampling::SampleOptions;
use crate::model::{ModelConfig, TrainSpec};
use crate::series::{default_quantiles, validate_quantile_grid, ForecastTask, DEFAULT_LOOKBACK, DEFAULT_VAL_RATIO};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Per-cell seed: a hash of the master seed and the cell coordinates.
pub fn cell_seed(master: u64, model: &str, dataset: &str, horizon: usize, repetition: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    for part in [model.as_bytes(), dataset.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update((horizon as u64).to_le_bytes());
    h.update((repetition as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn rebase(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingFile(path.to_path_buf()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRef {
    pub id: String,
    pub path: PathBuf,
    /// Fill gaps by linear interpolation instead of rejecting the file.
    #[serde(default)]
    pub impute: bool,
}

/// Where the test segment starts. Without a boundary every origin is scored.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: Option<String>,
    /// First timestamp of the test segment.
    pub train_end: Option<DateTime<Utc>>,
    /// Alternatively, the number of leading points before the test segment.
    pub train_points: Option<usize>,
    pub val_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelRef {
    Baseline { baseline: Baseline },
    Checkpoint { checkpoint: PathBuf, id: Option<String> },
}

impl ModelRef {
    pub fn id(&self) -> String {
        match self {
            ModelRef::Baseline { baseline } => baseline.id().to_string(),
            ModelRef::Checkpoint { checkpoint, id } => id.clone().unwrap_or_else(|| {
                checkpoint
                    .file_stem()
                    .map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
            }),
        }
    }
}

fn default_horizons() -> Vec<usize> {
    vec![1, 6, 12, 24, 48]
}
fn default_lookback() -> usize {
    DEFAULT_LOOKBACK
}
fn default_stride() -> usize {
    1
}
fn default_pincs() -> Vec<f64> {
    vec![0.95, 0.9, 0.85, 0.8]
}
fn default_samples() -> usize {
    SampleOptions::default().samples
}
fn default_temperature() -> f64 {
    1.0
}
fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub datasets: Vec<DatasetRef>,
    #[serde(default)]
    pub scenario: Scenario,
    pub models: Vec<ModelRef>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default = "default_lookback")]
    pub lookback: usize,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    #[serde(default = "default_pincs")]
    pub pincs: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_one")]
    pub repetitions: usize,
    #[serde(default = "default_one")]
    pub threads: usize,
    /// Cap on scored windows per series (latest origins are kept).
    #[serde(default)]
    pub max_windows: Option<usize>,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub dm_loss: DmLoss,
}

impl BenchmarkConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() || self.models.is_empty() {
            return Err(Error::InvalidConfig("at least one dataset and one model are required".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidConfig("horizons must be positive".into()));
        }
        if self.lookback == 0 || self.stride == 0 || self.samples == 0 || self.repetitions == 0 {
            return Err(Error::InvalidConfig(
                "lookback, stride, samples and repetitions must be at least 1".into(),
            ));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::InvalidConfig("temperature must be non-negative".into()));
        }
        validate_quantile_grid(&self.quantiles)?;
        if self.pincs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::InvalidConfig("nominal coverages must lie in (0, 1)".into()));
        }
        if let Some(r) = self.scenario.val_ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::InvalidConfig("val_ratio must lie in (0, 1)".into()));
            }
        }
        self.baseline.validate()?;
        let mut ids: Vec<&str> = self.datasets.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("dataset ids must be unique".into()));
        }
        for d in &self.datasets {
            require_file(&d.path)?;
        }
        for m in &self.models {
            if let ModelRef::Checkpoint { checkpoint, .. } = m {
                require_file(checkpoint)?;
            }
        }
        Ok(())
    }

    /// Make relative dataset and checkpoint paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for d in &mut self.datasets {
            rebase(base, &mut d.path);
        }
        for m in &mut self.models {
            if let ModelRef::Checkpoint { checkpoint, .. } = m {
                rebase(base, checkpoint);
            }
        }
    }

    /// Levels every forecast must carry: the scoring grid plus interval bounds.
    pub fn forecast_levels(&self) -> Vec<f64> {
        levels_with_intervals(&self.quantiles, &self.pincs)
    }

    pub fn task(&self, horizon: usize) -> Result<ForecastTask> {
        ForecastTask::with_quantiles(horizon, self.lookback, self.forecast_levels())
    }

    pub fn val_ratio(&self) -> f64 {
        self.scenario.val_ratio.unwrap_or(DEFAULT_VAL_RATIO)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default)]
    pub impute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub context: usize,
    pub horizon: usize,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            context: 168,
            horizon: 24,
            stride: 24,
        }
    }
}

fn default_heldout() -> f64 {
    0.1
}

/// Everything `train` needs: pool sources, augmentation, model shape and optimiser.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub corpus: Vec<CorpusSource>,
    #[serde(default)]
    pub mixup: MixupSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub window: WindowSpec,
    /// Share of generated series kept aside for the held-out loss.
    #[serde(default = "default_heldout")]
    pub heldout_fraction: f64,
    pub output: Option<PathBuf>,
}

impl TrainConfig {
    /// Make relative corpus and output paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for c in &mut self.corpus {
            rebase(base, &mut c.path);
        }
        if let Some(o) = &mut self.output {
            rebase(base, o);
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.is_empty() {
            return Err(Error::InvalidConfig("corpus needs at least one source".into()));
        }
        for c in &self.corpus {
            require_file(&c.path)?;
        }
        self.mixup.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let w = &self.window;
        if w.context == 0 || w.horizon == 0 || w.stride == 0 {
            return Err(Error::InvalidConfig("window lengths must be positive".into()));
        }
        if w.horizon > self.model.horizon_len {
            return Err(Error::InvalidConfig("window horizon exceeds the model's horizon_len".into()));
        }
        if w.context + w.horizon > self.mixup.len {
            return Err(Error::InvalidConfig("mixup length is shorter than one training window".into()));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(Error::InvalidConfig("heldout_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Raw bytes of a config file and their hash.
pub fn read_config(path: &Path) -> Result<(String, String)> {
    require_file(path)?;
    let text = fs::read_to_string(path)?;
    let hash = sha256_hex(text.as_bytes());
    Ok((text, hash))
}
