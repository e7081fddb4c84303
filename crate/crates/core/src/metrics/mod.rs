//! Point, interval and quantile scores.

pub mod dm;
pub mod report;

pub use dm::{dm_from_differential, dm_test, DmLoss, DmResult};
pub use report::{build_report, deterministic_table, probabilistic_table, EvalPair, IntervalRow, MetricReport, ReportSpec};

use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;

fn check_pair(actual: &[f64], forecast: &[f64]) -> Result<()> {
    if actual.is_empty() {
        return Err(Error::EmptyInput);
    }
    if actual.len() != forecast.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} actuals against {} forecasts",
            actual.len(),
            forecast.len()
        )));
    }
    Ok(())
}

pub fn rmse(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_pair(actual, forecast)?;
    let ss: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f).powi(2)).sum();
    Ok((ss / actual.len() as f64).sqrt())
}

pub fn mae(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_pair(actual, forecast)?;
    let s: f64 = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum();
    Ok(s / actual.len() as f64)
}

/// Mean absolute percentage error in percent, relative to the actual value.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64> {
    check_pair(actual, forecast)?;
    if let Some(i) = actual.iter().position(|&a| a == 0.0) {
        return Err(Error::ZeroActualInMape(i));
    }
    let s: f64 = actual.iter().zip(forecast).map(|(a, f)| ((a - f) / a).abs()).sum();
    Ok(100.0 * s / actual.len() as f64)
}

fn check_interval(actual: &[f64], lower: &[f64], upper: &[f64]) -> Result<()> {
    check_pair(actual, lower)?;
    check_pair(actual, upper)?;
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Err(Error::InvalidConfig("interval lower bound above upper bound".into()));
    }
    Ok(())
}

/// Share of actuals inside `[lower, upper]` (bounds inclusive).
pub fn picp(actual: &[f64], lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_interval(actual, lower, upper)?;
    let hits = actual
        .iter()
        .zip(lower.iter().zip(upper))
        .filter(|(x, (l, u))| l <= x && x <= u)
        .count();
    Ok(hits as f64 / actual.len() as f64)
}

/// Mean interval width.
pub fn piaw(lower: &[f64], upper: &[f64]) -> Result<f64> {
    check_pair(lower, upper)?;
    Ok(lower.iter().zip(upper).map(|(l, u)| u - l).sum::<f64>() / lower.len() as f64)
}

/// Coverage minus nominal coverage, both as fractions.
pub fn ace(picp: f64, pinc: f64) -> f64 {
    picp - pinc
}

/// Winkler score of one point for a central interval with miss rate `alpha`.
pub fn winkler_point(x: f64, lower: f64, upper: f64, alpha: f64) -> f64 {
    let width = upper - lower;
    if x < lower {
        width + 2.0 * (lower - x) / alpha
    } else if x > upper {
        width + 2.0 * (x - upper) / alpha
    } else {
        width
    }
}

pub fn winkler(actual: &[f64], lower: &[f64], upper: &[f64], alpha: f64) -> Result<f64> {
    check_interval(actual, lower, upper)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("winkler alpha {alpha} outside (0, 1)")));
    }
    let total: f64 = actual
        .iter()
        .zip(lower.iter().zip(upper))
        .map(|(&x, (&l, &u))| winkler_point(x, l, u, alpha))
        .sum();
    Ok(total / actual.len() as f64)
}

pub fn pinball(x: f64, q: f64, alpha: f64) -> f64 {
    if x >= q {
        alpha * (x - q)
    } else {
        (1.0 - alpha) * (q - x)
    }
}

pub fn mean_pinball(actual: &[f64], quantile: &[f64], alpha: f64) -> Result<f64> {
    check_pair(actual, quantile)?;
    let s: f64 = actual.iter().zip(quantile).map(|(&x, &q)| pinball(x, q, alpha)).sum();
    Ok(s / actual.len() as f64)
}

/// Quantile score: mean pinball loss averaged over the forecast's levels.
pub fn qs(actual: &[f64], qf: &QuantileForecast) -> Result<f64> {
    if qf.levels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for (&a, row) in qf.levels.iter().zip(&qf.values) {
        total += mean_pinball(actual, row, a)?;
    }
    Ok(total / qf.levels.len() as f64)
}

/// CRPS estimated from quantiles: twice the quantile score on the same grid.
pub fn crps(actual: &[f64], qf: &QuantileForecast) -> Result<f64> {
    Ok(2.0 * qs(actual, qf)?)
}
