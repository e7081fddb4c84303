use super::residual::residual_quantiles;
use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::series::ForecastTask;

/// Seasonal naive point forecast: `x̂[t+j] = x[t+j-m]`, reusing earlier
/// forecasts once `j > m`.
pub fn seasonal_naive_point(history: &[f64], horizon: usize, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::InvalidConfig("seasonal period must be at least 1".into()));
    }
    if history.len() < m {
        return Err(Error::SeriesTooShort {
            needed: m,
            actual: history.len(),
        });
    }
    let mut extended = history.to_vec();
    for _ in 0..horizon {
        extended.push(extended[extended.len() - m]);
    }
    Ok(extended.split_off(history.len()))
}

/// In-sample seasonal differences `x[t] - x[t-m]`.
pub fn seasonal_residuals(history: &[f64], m: usize) -> Vec<f64> {
    history.iter().skip(m).zip(history).map(|(a, b)| a - b).collect()
}

pub fn seasonal_naive(history: &[f64], task: &ForecastTask, m: usize) -> Result<QuantileForecast> {
    let point = seasonal_naive_point(history, task.horizon, m)?;
    residual_quantiles(&point, &seasonal_residuals(history, m), &task.quantiles)
}
