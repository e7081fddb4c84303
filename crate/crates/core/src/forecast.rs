//! The quantile forecast produced by every model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::TokenizerSpec;

const LEVEL_TOL: f64 = 1e-9;

/// Per-step values at a set of quantile levels, plus any raw sample paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileForecast {
    /// Strictly increasing quantile levels in (0, 1).
    pub levels: Vec<f64>,
    /// `values[level][step]`.
    pub values: Vec<Vec<f64>>,
    /// `sample_paths[sample][step]`; empty for closed-form forecasters.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sample_paths: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokenizer: Option<TokenizerSpec>,
}

impl QuantileForecast {
    /// Build from explicit rows, sorting each step so rows are non-decreasing in level.
    pub fn from_rows(levels: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if levels.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} levels but {} rows",
                levels.len(),
                values.len()
            )));
        }
        let mut qf = Self {
            levels,
            values,
            sample_paths: Vec::new(),
            tokenizer: None,
        };
        qf.enforce_monotone();
        Ok(qf)
    }

    /// Empirical quantiles of sample paths by the nearest-rank method.
    pub fn from_samples(levels: &[f64], paths: Vec<Vec<f64>>) -> Result<Self> {
        let horizon = paths.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if paths.iter().any(|p| p.len() != horizon) {
            return Err(Error::ShapeMismatch("sample paths differ in length".into()));
        }
        let mut values = vec![vec![0.0; horizon]; levels.len()];
        let mut column = vec![0.0; paths.len()];
        for t in 0..horizon {
            for (c, p) in column.iter_mut().zip(&paths) {
                *c = p[t];
            }
            column.sort_by(f64::total_cmp);
            for (row, &a) in values.iter_mut().zip(levels) {
                row[t] = nearest_rank(&column, a);
            }
        }
        let mut qf = Self::from_rows(levels.to_vec(), values)?;
        qf.sample_paths = paths;
        Ok(qf)
    }

    pub fn horizon(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn level_index(&self, level: f64) -> Option<usize> {
        self.levels.iter().position(|&a| (a - level).abs() < LEVEL_TOL)
    }

    pub fn row(&self, level: f64) -> Option<&[f64]> {
        self.level_index(level).map(|i| self.values[i].as_slice())
    }

    /// Sort every step across levels so quantile rows never cross.
    pub fn enforce_monotone(&mut self) {
        let mut column = vec![0.0; self.levels.len()];
        for t in 0..self.horizon() {
            for (c, row) in column.iter_mut().zip(&self.values) {
                *c = row[t];
            }
            column.sort_by(f64::total_cmp);
            for (row, &c) in self.values.iter_mut().zip(&column) {
                row[t] = c;
            }
        }
    }

    /// Number of (level pair, step) positions where a higher level sits below a lower one.
    pub fn monotonicity_violations(&self) -> usize {
        self.values
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).filter(|(a, b)| a > b).count())
            .sum()
    }

    /// Restrict to the given levels (which must all be present).
    pub fn select(&self, levels: &[f64]) -> Result<Self> {
        let values = levels
            .iter()
            .map(|&a| {
                self.row(a)
                    .map(<[f64]>::to_vec)
                    .ok_or_else(|| Error::InvalidConfig(format!("level {a} missing from forecast")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            levels: levels.to_vec(),
            values,
            sample_paths: Vec::new(),
            tokenizer: self.tokenizer.clone(),
        })
    }
}

/// Nearest-rank quantile of sorted data: the `ceil(a * n)`-th order statistic.
pub fn nearest_rank(sorted: &[f64], a: f64) -> f64 {
    let n = sorted.len();
    let rank = ((a * n as f64) - LEVEL_TOL).ceil().clamp(1.0, n as f64) as usize;
    sorted[rank - 1]
}

/// The median trajectory: the 0.5 row, interpolated between neighbouring
/// levels when 0.5 is not on the grid.
pub fn point_forecast(qf: &QuantileForecast) -> Vec<f64> {
    if let Some(row) = qf.row(0.5) {
        return row.to_vec();
    }
    let upper = qf.levels.iter().position(|&a| a > 0.5);
    match upper {
        Some(0) => qf.values[0].clone(),
        None => qf.values[qf.levels.len() - 1].clone(),
        Some(j) => {
            let (a0, a1) = (qf.levels[j - 1], qf.levels[j]);
            let w = (0.5 - a0) / (a1 - a0);
            qf.values[j - 1]
                .iter()
                .zip(&qf.values[j])
                .map(|(lo, hi)| lo + w * (hi - lo))
                .collect()
        }
    }
}

/// Lower and upper levels of the central interval with nominal coverage `pinc`.
pub fn interval_levels(pinc: f64) -> (f64, f64) {
    let alpha = 1.0 - pinc;
    (round_level(alpha / 2.0), round_level(1.0 - alpha / 2.0))
}

fn round_level(a: f64) -> f64 {
    (a * 1e9).round() / 1e9
}

/// Sorted union of a scoring grid and the interval levels needed for `pincs`.
pub fn levels_with_intervals(grid: &[f64], pincs: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = grid.iter().copied().map(round_level).collect();
    for &p in pincs {
        let (lo, hi) = interval_levels(p);
        levels.push(lo);
        levels.push(hi);
    }
    levels.sort_by(f64::total_cmp);
    levels.dedup_by(|a, b| (*a - *b).abs() < LEVEL_TOL);
    levels
}
