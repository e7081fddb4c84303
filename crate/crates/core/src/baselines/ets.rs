//! Small exponential-smoothing family chosen by grid search: simple, Holt
//! additive trend, and Holt-Winters additive season.

use serde::{Deserialize, Serialize};

use super::residual::residual_quantiles;
use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::series::ForecastTask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtsKind {
    Ses,
    Holt,
    HoltWinters,
}

impl EtsKind {
    pub const ALL: [EtsKind; 3] = [EtsKind::Ses, EtsKind::Holt, EtsKind::HoltWinters];

    fn min_len(self, m: usize) -> usize {
        match self {
            EtsKind::Ses => 2,
            EtsKind::Holt => 3,
            EtsKind::HoltWinters => 2 * m,
        }
    }
}

const GRID: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const VALIDATION_SHARE: f64 = 0.2;

/// A fitted candidate: smoothing constants and the state after the last observation.
#[derive(Debug, Clone, PartialEq)]
pub struct EtsFit {
    pub kind: EtsKind,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub level: f64,
    pub trend: f64,
    /// Seasonal terms indexed by absolute time modulo `m`.
    pub season: Vec<f64>,
    /// `(index, one-step forecast)` for every observation the model could predict.
    pub fitted: Vec<(usize, f64)>,
    pub validation_mse: f64,
}

impl EtsFit {
    pub fn forecast(&self, n: usize, horizon: usize) -> Vec<f64> {
        (1..=horizon)
            .map(|j| {
                let s = if self.season.is_empty() {
                    0.0
                } else {
                    self.season[(n - 1 + j) % self.season.len()]
                };
                self.level + j as f64 * self.trend + s
            })
            .collect()
    }

    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        self.fitted.iter().map(|&(i, f)| x[i] - f).collect()
    }
}

fn run(kind: EtsKind, x: &[f64], m: usize, alpha: f64, beta: f64, gamma: f64, val_start: usize) -> EtsFit {
    let mut fitted = Vec::with_capacity(x.len());
    let (mut level, mut trend, mut season, start) = match kind {
        EtsKind::Ses => (x[0], 0.0, Vec::new(), 1),
        EtsKind::Holt => (x[1], x[1] - x[0], Vec::new(), 2),
        EtsKind::HoltWinters => {
            let first = x[..m].iter().sum::<f64>() / m as f64;
            let second = x[m..2 * m].iter().sum::<f64>() / m as f64;
            let season = x[..m].iter().map(|v| v - first).collect();
            (first, (second - first) / m as f64, season, m)
        }
    };
    for (t, &obs) in x.iter().enumerate().skip(start) {
        let s = if season.is_empty() { 0.0 } else { season[t % m] };
        fitted.push((t, level + trend + s));
        let prev = level;
        match kind {
            EtsKind::Ses => level = alpha * obs + (1.0 - alpha) * level,
            EtsKind::Holt => {
                level = alpha * obs + (1.0 - alpha) * (level + trend);
                trend = beta * (level - prev) + (1.0 - beta) * trend;
            }
            EtsKind::HoltWinters => {
                level = alpha * (obs - s) + (1.0 - alpha) * (level + trend);
                trend = beta * (level - prev) + (1.0 - beta) * trend;
                season[t % m] = gamma * (obs - level) + (1.0 - gamma) * s;
            }
        }
    }
    let scored: Vec<f64> = fitted
        .iter()
        .filter(|(i, _)| *i >= val_start)
        .map(|&(i, f)| (x[i] - f).powi(2))
        .collect();
    let validation_mse = if scored.is_empty() {
        f64::INFINITY
    } else {
        scored.iter().sum::<f64>() / scored.len() as f64
    };
    EtsFit {
        kind,
        alpha,
        beta,
        gamma,
        level,
        trend,
        season,
        fitted,
        validation_mse,
    }
}

fn best_of(kind: EtsKind, x: &[f64], m: usize, val_start: usize) -> EtsFit {
    let betas: &[f64] = if kind == EtsKind::Ses { &[0.0] } else { &GRID };
    let gammas: &[f64] = if kind == EtsKind::HoltWinters { &GRID } else { &[0.0] };
    let mut best: Option<EtsFit> = None;
    for &a in &GRID {
        for &b in betas {
            for &g in gammas {
                let fit = run(kind, x, m, a, b, g, val_start);
                if best.as_ref().is_none_or(|f| fit.validation_mse < f.validation_mse) {
                    best = Some(fit);
                }
            }
        }
    }
    best.expect("grid is non-empty")
}

/// Whether `complex` beats `simple` by more than numerical noise.
fn clearly_better(complex: f64, simple: f64) -> bool {
    complex < simple * (1.0 - 1e-6) - 1e-12
}

/// Fit every candidate long enough for the data and keep the best by one-step
/// MSE over the last 20% of observations; ties go to the simpler model.
pub fn ets_select(x: &[f64], m: usize, candidates: &[EtsKind]) -> Result<EtsFit> {
    let mut kinds: Vec<EtsKind> = candidates.iter().copied().filter(|k| x.len() >= k.min_len(m)).collect();
    kinds.sort();
    kinds.dedup();
    if kinds.is_empty() {
        let needed = candidates.iter().map(|k| k.min_len(m)).min().unwrap_or(2);
        return Err(Error::SeriesTooShort {
            needed,
            actual: x.len(),
        });
    }
    let n_val = ((x.len() as f64 * VALIDATION_SHARE).round() as usize).max(1);
    let val_start = x.len() - n_val;
    let mut chosen: Option<EtsFit> = None;
    for kind in kinds {
        let fit = best_of(kind, x, m, val_start);
        if chosen
            .as_ref()
            .is_none_or(|c| clearly_better(fit.validation_mse, c.validation_mse))
        {
            chosen = Some(fit);
        }
    }
    Ok(chosen.expect("at least one candidate"))
}

pub fn ets_lite(history: &[f64], task: &ForecastTask, m: usize, candidates: &[EtsKind]) -> Result<QuantileForecast> {
    let fit = ets_select(history, m, candidates)?;
    let point = fit.forecast(history.len(), task.horizon);
    residual_quantiles(&point, &fit.residuals(history), &task.quantiles)
}
