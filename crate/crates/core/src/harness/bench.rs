//! Rolling-origin evaluation of every (model, dataset, horizon) cell.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{cell_seed, BenchmarkConfig, ModelRef};
use crate::baselines::{forecast_baseline, Baseline, BaselineConfig};
use crate::error::{Error, Result};
use crate::forecast::{point_forecast, QuantileForecast};
use crate::metrics::{build_report, dm_test, DmLoss, DmResult, EvalPair, MetricReport, ReportSpec};
use crate::model::sampling::{sample_forecast, SampleOptions};
use crate::model::Checkpoint;
use crate::series::{load_csv, rolling_origins, split_scenario, split_scenario_at, CsvOptions, ForecastTask, TimeSeries};

/// Anything that turns a context window into a quantile forecast.
#[derive(Debug, Clone)]
pub enum Forecaster {
    Baseline { baseline: Baseline, config: BaselineConfig },
    Model { id: String, checkpoint: Box<Checkpoint>, options: SampleOptions },
}

impl Forecaster {
    pub fn from_ref(model: &ModelRef, cfg: &BenchmarkConfig) -> Result<Self> {
        Ok(match model {
            ModelRef::Baseline { baseline } => Forecaster::Baseline {
                baseline: *baseline,
                config: cfg.baseline.clone(),
            },
            ModelRef::Checkpoint { checkpoint, .. } => Forecaster::Model {
                id: model.id(),
                checkpoint: Box::new(Checkpoint::load(checkpoint)?),
                options: SampleOptions {
                    samples: cfg.samples,
                    temperature: cfg.temperature,
                },
            },
        })
    }

    pub fn id(&self) -> String {
        match self {
            Forecaster::Baseline { baseline, .. } => baseline.id().to_string(),
            Forecaster::Model { id, .. } => id.clone(),
        }
    }

    pub fn forecast(&self, context: &[f64], task: &ForecastTask, rng: &mut ChaCha8Rng) -> Result<QuantileForecast> {
        match self {
            Forecaster::Baseline { baseline, config } => forecast_baseline(*baseline, context, task, config, rng),
            Forecaster::Model { checkpoint, options, .. } => {
                sample_forecast(&checkpoint.params, &checkpoint.config, context, task, *options, rng)
            }
        }
    }
}

/// A dataset's series with the index where scoring starts in each.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub series: Vec<TimeSeries>,
    pub test_start: Vec<usize>,
}

impl Dataset {
    pub fn load(id: &str, path: &std::path::Path, impute: bool, cfg: &BenchmarkConfig) -> Result<Self> {
        let options = CsvOptions {
            impute,
            ..Default::default()
        };
        let series: Vec<TimeSeries> = load_csv(path, &options)?.into_iter().map(|l| l.series).collect();
        Self::from_series(id, series, cfg)
    }

    pub fn from_series(id: &str, series: Vec<TimeSeries>, cfg: &BenchmarkConfig) -> Result<Self> {
        let sc = &cfg.scenario;
        let test_start = series
            .iter()
            .map(|ts| {
                let split = match (sc.train_end, sc.train_points) {
                    (Some(t), _) => Some(split_scenario(ts, t, cfg.val_ratio())?),
                    (None, Some(n)) => Some(split_scenario_at(ts, n, cfg.val_ratio())?),
                    (None, None) => None,
                };
                Ok(split.map_or(0, |s| s.train.len() + s.validation.len()))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            id: id.to_string(),
            series,
            test_start,
        })
    }
}

/// Scored windows of one dataset at one horizon, in series then origin order.
pub struct WindowRef<'a> {
    pub series: &'a TimeSeries,
    pub origin: usize,
    pub context: &'a [f64],
    pub actuals: &'a [f64],
}

pub fn dataset_windows<'a>(ds: &'a Dataset, task: &ForecastTask, cfg: &BenchmarkConfig) -> Result<Vec<WindowRef<'a>>> {
    let mut out = Vec::new();
    for (ts, &start) in ds.series.iter().zip(&ds.test_start) {
        let mut windows: Vec<_> = rolling_origins(&ts.values, task, cfg.stride)?
            .into_iter()
            .filter(|w| w.origin >= start)
            .collect();
        if let Some(cap) = cfg.max_windows {
            let skip = windows.len().saturating_sub(cap);
            windows.drain(..skip);
        }
        out.extend(windows.into_iter().map(|w| WindowRef {
            series: ts,
            origin: w.origin,
            context: w.context,
            actuals: w.actuals,
        }));
    }
    if out.is_empty() {
        return Err(Error::SeriesTooShort {
            needed: task.lookback + task.horizon,
            actual: ds.series.iter().map(TimeSeries::len).max().unwrap_or(0),
        });
    }
    Ok(out)
}

/// `h`-step-ahead errors keyed by origin, for pairwise tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellErrors {
    pub model: String,
    pub dataset: String,
    pub horizon: usize,
    pub origins: Vec<(String, usize)>,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub model: String,
    pub dataset: String,
    pub horizon: usize,
    pub windows: usize,
    /// Mean and standard deviation per window, first window excluded as warm-up.
    pub inference_mean_secs: f64,
    pub inference_std_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub series_id: String,
    pub timestamp: String,
    pub actual: f64,
    pub point: f64,
    /// Values at the scoring grid, lowest level first.
    pub quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub model: String,
    pub dataset: String,
    pub horizon: usize,
    pub error: String,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub report: MetricReport,
    pub errors: CellErrors,
    pub timing: CellTiming,
    pub plot: Vec<PlotRow>,
}

struct WindowResult {
    forecast: QuantileForecast,
    secs: f64,
}

fn run_repetition(
    forecaster: &Forecaster,
    windows: &[WindowRef],
    task: &ForecastTask,
    seed: u64,
) -> Result<Vec<WindowResult>> {
    windows
        .par_iter()
        .enumerate()
        .map(|(k, w)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let start = Instant::now();
            let forecast = forecaster.forecast(w.context, task, &mut rng)?;
            Ok(WindowResult {
                forecast,
                secs: start.elapsed().as_secs_f64(),
            })
        })
        .collect()
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Evaluate one cell over all repetitions; the report is the repetition mean.
pub fn run_cell(forecaster: &Forecaster, ds: &Dataset, horizon: usize, cfg: &BenchmarkConfig) -> Result<CellOutcome> {
    let task = cfg.task(horizon)?;
    let windows = dataset_windows(ds, &task, cfg)?;
    let model = forecaster.id();
    let spec = ReportSpec {
        grid: cfg.quantiles.clone(),
        pincs: cfg.pincs.clone(),
    };
    let mut reports = Vec::with_capacity(cfg.repetitions);
    let mut first: Option<Vec<WindowResult>> = None;
    for rep in 0..cfg.repetitions {
        let results = run_repetition(forecaster, &windows, &task, cell_seed(cfg.seed, &model, &ds.id, horizon, rep))?;
        let pairs: Vec<EvalPair> = windows
            .iter()
            .zip(&results)
            .map(|(w, r)| EvalPair {
                actuals: w.actuals.to_vec(),
                forecast: r.forecast.clone(),
            })
            .collect();
        reports.push(build_report(&model, &ds.id, horizon, &pairs, &spec)?);
        if first.is_none() {
            first = Some(results);
        }
    }
    let results = first.expect("at least one repetition");

    let mut errors = CellErrors {
        model: model.clone(),
        dataset: ds.id.clone(),
        horizon,
        origins: Vec::with_capacity(windows.len()),
        errors: Vec::with_capacity(windows.len()),
    };
    let mut plot = Vec::with_capacity(windows.len());
    for (w, r) in windows.iter().zip(&results) {
        let point = point_forecast(&r.forecast);
        let last = horizon - 1;
        errors.origins.push((w.series.id.clone(), w.origin));
        errors.errors.push(w.actuals[last] - point[last]);
        plot.push(PlotRow {
            series_id: w.series.id.clone(),
            timestamp: w.series.timestamp(w.origin + last).to_rfc3339(),
            actual: w.actuals[last],
            point: point[last],
            quantiles: cfg
                .quantiles
                .iter()
                .map(|&a| r.forecast.row(a).map_or(f64::NAN, |row| row[last]))
                .collect(),
        });
    }
    let secs: Vec<f64> = results.iter().skip(1).map(|r| r.secs).collect();
    let (mean, std) = mean_std(&secs);
    Ok(CellOutcome {
        report: MetricReport::mean(&reports)?,
        errors,
        timing: CellTiming {
            model,
            dataset: ds.id.clone(),
            horizon,
            windows: windows.len(),
            inference_mean_secs: mean,
            inference_std_secs: std,
        },
        plot,
    })
}

/// Deterministic part of a run: everything in `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    pub config_hash: String,
    pub config: String,
    pub seed: u64,
    pub reports: Vec<MetricReport>,
    pub failed: Vec<FailedCell>,
}

impl RunRecord {
    /// Whether the stored config still hashes to the recorded value everywhere.
    pub fn verify(&self) -> bool {
        let hash = super::config::sha256_hex(self.config.as_bytes());
        hash == self.config_hash && self.reports.iter().all(|r| r.config_hash.as_deref() == Some(hash.as_str()))
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub record: RunRecord,
    pub errors: Vec<CellErrors>,
    pub timings: Vec<CellTiming>,
    pub plots: Vec<((String, String, usize), Vec<PlotRow>)>,
}

/// Run every cell. Cell failures are recorded and the run continues.
pub fn run_benchmark(cfg: &BenchmarkConfig, config_text: &str) -> Result<BenchmarkRun> {
    cfg.validate()?;
    let config_hash = super::config::sha256_hex(config_text.as_bytes());
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let datasets = cfg
        .datasets
        .iter()
        .map(|d| Dataset::load(&d.id, &d.path, d.impute, cfg))
        .collect::<Result<Vec<_>>>()?;
    let forecasters = cfg
        .models
        .iter()
        .map(|m| Forecaster::from_ref(m, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut horizons = cfg.horizons.clone();
    horizons.sort_unstable();
    horizons.dedup();

    let mut cells = Vec::new();
    for ds in &datasets {
        for f in &forecasters {
            for &h in &horizons {
                cells.push((ds, f, h));
            }
        }
    }
    cells.sort_by(|a, b| (&a.0.id, a.1.id(), a.2).cmp(&(&b.0.id, b.1.id(), b.2)));

    let mut run = BenchmarkRun {
        record: RunRecord {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.clone(),
            config: config_text.to_string(),
            seed: cfg.seed,
            reports: Vec::new(),
            failed: Vec::new(),
        },
        errors: Vec::new(),
        timings: Vec::new(),
        plots: Vec::new(),
    };
    for (ds, f, h) in cells {
        match pool.install(|| run_cell(f, ds, h, cfg)) {
            Ok(mut out) => {
                out.report.config_hash = Some(config_hash.clone());
                run.record.reports.push(out.report);
                run.errors.push(out.errors);
                run.timings.push(out.timing);
                run.plots.push(((f.id(), ds.id.clone(), h), out.plot));
            }
            Err(e) => run.record.failed.push(FailedCell {
                model: f.id(),
                dataset: ds.id.clone(),
                horizon: h,
                error: e.to_string(),
            }),
        }
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmRow {
    pub dataset: String,
    pub horizon: usize,
    pub n: usize,
    #[serde(flatten)]
    pub result: DmResult,
}

/// Pairwise test of model `a` against model `b` for every shared (dataset, horizon).
pub fn dm_table(errors: &[CellErrors], a: &str, b: &str, loss: DmLoss) -> Result<Vec<DmRow>> {
    let mut rows = Vec::new();
    for ea in errors.iter().filter(|e| e.model == a) {
        let Some(eb) = errors
            .iter()
            .find(|e| e.model == b && e.dataset == ea.dataset && e.horizon == ea.horizon)
        else {
            continue;
        };
        if ea.origins != eb.origins {
            return Err(Error::MismatchedWindows);
        }
        rows.push(DmRow {
            dataset: ea.dataset.clone(),
            horizon: ea.horizon,
            n: ea.errors.len(),
            result: dm_test(&ea.errors, &eb.errors, ea.horizon, loss)?,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidConfig(format!("no cells shared by `{a}` and `{b}`")));
    }
    Ok(rows)
}

pub fn dm_text(rows: &[DmRow], a: &str, b: &str) -> String {
    let mut out = format!("DM test: {a} vs {b} (positive statistic: {a} has larger loss)\n");
    out.push_str(&format!(
        "{:<16} {:>4} {:>6} {:>10} {:>10} {:>7}\n",
        "dataset", "h", "n", "DM", "p-value", "reject"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:>4} {:>6} {:>10.4} {:>10.4} {:>7}\n",
            r.dataset,
            r.horizon,
            r.n,
            r.result.statistic,
            r.result.p_value,
            if r.result.reject { "yes" } else { "no" }
        ));
    }
    out
}
