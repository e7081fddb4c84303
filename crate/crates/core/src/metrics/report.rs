//! Pooled metric reports and their text-table rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ace, crps, mae, mape, picp, piaw, qs, rmse, winkler};
use crate::error::{Error, Result};
use crate::forecast::{interval_levels, point_forecast, QuantileForecast};

/// Actuals for one forecast window alongside the forecast.
#[derive(Debug, Clone)]
pub struct EvalPair {
    pub actuals: Vec<f64>,
    pub forecast: QuantileForecast,
}

/// Scoring grid for QS/CRPS and the nominal interval coverages to report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSpec {
    pub grid: Vec<f64>,
    pub pincs: Vec<f64>,
}

impl Default for ReportSpec {
    fn default() -> Self {
        Self {
            grid: crate::series::default_quantiles(),
            pincs: vec![0.95, 0.9, 0.85, 0.8],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub pinc: f64,
    pub picp: f64,
    pub ace: f64,
    pub piaw: f64,
    pub winkler: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub model: String,
    pub dataset: String,
    pub horizon: usize,
    pub windows: usize,
    pub points: usize,
    /// How windows are combined; always "pooled".
    pub aggregation: String,
    pub rmse: f64,
    pub mae: f64,
    /// Percent; absent when some actual value is zero.
    pub mape: Option<f64>,
    pub qs: f64,
    pub crps: f64,
    pub intervals: Vec<IntervalRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// Score every window and pool all points before averaging.
pub fn build_report(model: &str, dataset: &str, horizon: usize, pairs: &[EvalPair], spec: &ReportSpec) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut actual = Vec::new();
    let mut point = Vec::new();
    let mut grid_rows: Vec<Vec<f64>> = vec![Vec::new(); spec.grid.len()];
    let mut bounds: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); spec.pincs.len()];
    for pair in pairs {
        let qf = &pair.forecast;
        if qf.horizon() != pair.actuals.len() {
            return Err(Error::ShapeMismatch(format!(
                "forecast of {} steps against {} actuals",
                qf.horizon(),
                pair.actuals.len()
            )));
        }
        actual.extend_from_slice(&pair.actuals);
        point.extend(point_forecast(qf));
        for (row, &a) in grid_rows.iter_mut().zip(&spec.grid) {
            row.extend_from_slice(level_row(qf, a)?);
        }
        for ((lo, hi), &p) in bounds.iter_mut().zip(&spec.pincs) {
            let (a_lo, a_hi) = interval_levels(p);
            lo.extend_from_slice(level_row(qf, a_lo)?);
            hi.extend_from_slice(level_row(qf, a_hi)?);
        }
    }
    let pooled = QuantileForecast {
        levels: spec.grid.clone(),
        values: grid_rows,
        sample_paths: Vec::new(),
        tokenizer: None,
    };
    let intervals = spec
        .pincs
        .iter()
        .zip(&bounds)
        .map(|(&pinc, (lo, hi))| {
            let coverage = picp(&actual, lo, hi)?;
            Ok(IntervalRow {
                pinc,
                picp: coverage,
                ace: ace(coverage, pinc),
                piaw: piaw(lo, hi)?,
                winkler: winkler(&actual, lo, hi, 1.0 - pinc)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MetricReport {
        model: model.to_string(),
        dataset: dataset.to_string(),
        horizon,
        windows: pairs.len(),
        points: actual.len(),
        aggregation: "pooled".into(),
        rmse: rmse(&actual, &point)?,
        mae: mae(&actual, &point)?,
        mape: mape(&actual, &point).ok(),
        qs: qs(&actual, &pooled)?,
        crps: crps(&actual, &pooled)?,
        intervals,
        config_hash: None,
    })
}

fn level_row(qf: &QuantileForecast, a: f64) -> Result<&[f64]> {
    qf.row(a)
        .ok_or_else(|| Error::InvalidConfig(format!("forecast lacks quantile level {a}")))
}

impl MetricReport {
    /// Field-wise mean of reports for the same cell (repetitions).
    pub fn mean(reports: &[MetricReport]) -> Result<MetricReport> {
        let first = reports.first().ok_or(Error::EmptyInput)?;
        let n = reports.len() as f64;
        let avg = |f: &dyn Fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let mape = reports
            .iter()
            .map(|r| r.mape)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / n);
        let intervals = first
            .intervals
            .iter()
            .enumerate()
            .map(|(i, row)| IntervalRow {
                pinc: row.pinc,
                picp: avg(&|r| r.intervals[i].picp),
                ace: avg(&|r| r.intervals[i].ace),
                piaw: avg(&|r| r.intervals[i].piaw),
                winkler: avg(&|r| r.intervals[i].winkler),
            })
            .collect();
        Ok(MetricReport {
            rmse: avg(&|r| r.rmse),
            mae: avg(&|r| r.mae),
            mape,
            qs: avg(&|r| r.qs),
            crps: avg(&|r| r.crps),
            intervals,
            ..first.clone()
        })
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

/// RMSE / MAE / MAPE per horizon, one row per (dataset, model).
pub fn deterministic_table(reports: &[MetricReport]) -> String {
    let mut horizons: Vec<usize> = reports.iter().map(|r| r.horizon).collect();
    horizons.sort_unstable();
    horizons.dedup();
    let mut rows: Vec<(&str, &str)> = reports.iter().map(|r| (r.dataset.as_str(), r.model.as_str())).collect();
    rows.sort_unstable();
    rows.dedup();

    let mut out = format!("{:<16} {:<20}", "dataset", "model");
    for h in &horizons {
        let _ = write!(out, " | {:>10} {:>10} {:>9}", format!("RMSE@{h}"), format!("MAE@{h}"), format!("MAPE%@{h}"));
    }
    out.push('\n');
    for (dataset, model) in rows {
        let _ = write!(out, "{dataset:<16} {model:<20}");
        for &h in &horizons {
            match reports.iter().find(|r| r.dataset == dataset && r.model == model && r.horizon == h) {
                Some(r) => {
                    let _ = write!(out, " | {:>10.3} {:>10.3} {:>9}", r.rmse, r.mae, fmt_opt(r.mape));
                }
                None => {
                    let _ = write!(out, " | {:>10} {:>10} {:>9}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// PICP / ACE / PIAW / WS per nominal coverage, plus QS and CRPS.
pub fn probabilistic_table(reports: &[MetricReport]) -> String {
    let mut out = format!(
        "{:<16} {:<20} {:>4} {:>9} {:>9} {:>9} {:>10} {:>10} {:>10} {:>10}\n",
        "dataset", "model", "h", "QS", "CRPS", "PINC%", "PICP%", "ACE%", "PIAW", "WS"
    );
    let mut sorted: Vec<&MetricReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (&a.dataset, &a.model, a.horizon).cmp(&(&b.dataset, &b.model, b.horizon)));
    for r in sorted {
        for row in &r.intervals {
            let _ = writeln!(
                out,
                "{:<16} {:<20} {:>4} {:>9.4} {:>9.4} {:>9.1} {:>10.2} {:>10.2} {:>10.3} {:>10.3}",
                r.dataset,
                r.model,
                r.horizon,
                r.qs,
                r.crps,
                100.0 * row.pinc,
                100.0 * row.picp,
                100.0 * row.ace,
                row.piaw,
                row.winkler
            );
        }
    }
    out
}
