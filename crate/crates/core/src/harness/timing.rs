//! Wall-clock training and inference measurements.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bench::{dataset_windows, mean_std, Dataset, Forecaster};
use super::config::{BenchmarkConfig, ModelRef};
use crate::error::{Error, Result};

/// Training metadata written next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSidecar {
    pub train_secs: f64,
    pub steps: usize,
    pub initial_heldout_loss: f64,
    pub final_heldout_loss: f64,
    pub corpus_windows: usize,
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".train.json");
    PathBuf::from(name)
}

pub fn read_sidecar(checkpoint: &Path) -> Option<TrainSidecar> {
    let text = fs::read_to_string(sidecar_path(checkpoint)).ok()?;
    serde_json::from_str(&text).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTiming {
    pub model: String,
    /// From the checkpoint's training sidecar; `None` for baselines, which have no training phase.
    pub train_secs: Option<f64>,
    pub horizon: usize,
    pub windows: usize,
    /// Mean per-window inference time of each run, warm-up window excluded.
    pub run_means: Vec<f64>,
    pub inference_mean_secs: f64,
    /// Spread of per-window times pooled over runs.
    pub inference_std_secs: f64,
}

/// Time each model on the first dataset's windows at `horizon`, single-threaded.
pub fn time_models(cfg: &BenchmarkConfig, horizon: usize, runs: usize) -> Result<Vec<ModelTiming>> {
    cfg.validate()?;
    if runs == 0 {
        return Err(Error::InvalidConfig("timing needs at least one run".into()));
    }
    let d = &cfg.datasets[0];
    let ds = Dataset::load(&d.id, &d.path, d.impute, cfg)?;
    let task = cfg.task(horizon)?;
    let windows = dataset_windows(&ds, &task, cfg)?;
    cfg.models
        .iter()
        .map(|m| {
            let forecaster = Forecaster::from_ref(m, cfg)?;
            let mut all = Vec::new();
            let mut run_means = Vec::with_capacity(runs);
            for run in 0..runs {
                let mut secs = Vec::with_capacity(windows.len());
                for (k, w) in windows.iter().enumerate() {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ run as u64);
                    rng.set_stream(k as u64);
                    let start = Instant::now();
                    forecaster.forecast(w.context, &task, &mut rng)?;
                    secs.push(start.elapsed().as_secs_f64());
                }
                let kept = if secs.len() > 1 { &secs[1..] } else { &secs[..] };
                run_means.push(mean_std(kept).0);
                all.extend_from_slice(kept);
            }
            let (mean, std) = mean_std(&all);
            let train_secs = match m {
                ModelRef::Checkpoint { checkpoint, .. } => read_sidecar(checkpoint).map(|s| s.train_secs),
                ModelRef::Baseline { .. } => None,
            };
            Ok(ModelTiming {
                model: forecaster.id(),
                train_secs,
                horizon,
                windows: windows.len(),
                run_means,
                inference_mean_secs: mean,
                inference_std_secs: std,
            })
        })
        .collect()
}

pub fn timing_text(rows: &[ModelTiming]) -> String {
    let mut out = format!(
        "{:<20} {:>14} {:>4} {:>8} {:>16} {:>16}\n",
        "model", "train (s)", "h", "windows", "infer mean (ms)", "infer std (ms)"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<20} {:>14} {:>4} {:>8} {:>16.4} {:>16.4}\n",
            r.model,
            r.train_secs.map_or_else(|| "-".into(), |s| format!("{s:.2}")),
            r.horizon,
            r.windows,
            1e3 * r.inference_mean_secs,
            1e3 * r.inference_std_secs
        ));
    }
    out
}
