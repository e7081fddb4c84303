//! Corpus generation and training from a [`TrainConfig`].

use std::time::Instant;

use super::config::TrainConfig;
use super::timing::TrainSidecar;
use crate::augment::generate_corpus;
use crate::error::{Error, Result};
use crate::model::data::windows_from_series;
use crate::model::{train, Checkpoint, TrainReport};
use crate::series::{load_csv, CsvOptions, TimeSeries};

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub checkpoint: Checkpoint,
    pub report: TrainReport,
    pub sidecar: TrainSidecar,
}

pub fn load_pool(cfg: &TrainConfig) -> Result<Vec<TimeSeries>> {
    let mut pool = Vec::new();
    for src in &cfg.corpus {
        let options = CsvOptions {
            impute: src.impute,
            ..Default::default()
        };
        pool.extend(load_csv(&src.path, &options)?.into_iter().map(|l| l.series));
    }
    Ok(pool)
}

/// Mix the pool, hold out the last share of mixes and train on the rest.
pub fn train_from_pool(pool: &[TimeSeries], cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let start = Instant::now();
    let corpus = generate_corpus(pool, &cfg.mixup)?;
    let n_held = ((corpus.len() as f64 * cfg.heldout_fraction).round() as usize).max(1);
    if n_held >= corpus.len() {
        return Err(Error::InvalidConfig("mixup count is too small to hold out any series".into()));
    }
    let (train_series, held_series) = corpus.split_at(corpus.len() - n_held);
    let w = &cfg.window;
    let train_windows = windows_from_series(train_series, w.context, w.horizon, w.stride, &cfg.model)?;
    let held_windows = windows_from_series(held_series, w.context, w.horizon, w.stride, &cfg.model)?;
    let outcome = train(&train_windows, &held_windows, &cfg.model, &cfg.train)?;
    let sidecar = TrainSidecar {
        train_secs: start.elapsed().as_secs_f64(),
        steps: cfg.train.steps,
        initial_heldout_loss: outcome.report.initial_heldout_loss,
        final_heldout_loss: outcome.report.final_heldout_loss,
        corpus_windows: train_windows.len(),
    };
    Ok(TrainedModel {
        checkpoint: Checkpoint {
            config: cfg.model.clone(),
            train: cfg.train.clone(),
            params: outcome.params,
        },
        report: outcome.report,
        sidecar,
    })
}
