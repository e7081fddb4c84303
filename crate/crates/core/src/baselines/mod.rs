//! Statistical comparison models. Each produces point and quantile forecasts.

pub mod croston;
pub mod ets;
pub mod npts;
pub mod residual;
pub mod snm;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use croston::croston_sba;
pub use ets::{ets_lite, EtsKind};
pub use npts::{npts, NptsParams};
pub use residual::residual_quantiles;
pub use snm::seasonal_naive;

use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::series::{ForecastTask, HOURLY_SEASON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Baseline {
    #[serde(rename = "snm")]
    SeasonalNaive,
    #[serde(rename = "csba")]
    CrostonSba,
    #[serde(rename = "npts")]
    Npts,
    #[serde(rename = "ets_lite")]
    EtsLite,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::SeasonalNaive, Baseline::CrostonSba, Baseline::Npts, Baseline::EtsLite];

    pub fn id(self) -> &'static str {
        match self {
            Baseline::SeasonalNaive => "snm",
            Baseline::CrostonSba => "csba",
            Baseline::Npts => "npts",
            Baseline::EtsLite => "ets_lite",
        }
    }

    /// Whether forecasts depend on the random stream.
    pub fn is_stochastic(self) -> bool {
        self == Baseline::Npts
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown baseline `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Seasonal period.
    pub m: usize,
    pub croston_alpha: f64,
    pub npts_lambda: f64,
    pub npts_seasonal: bool,
    pub npts_samples: usize,
    pub ets_candidates: Vec<EtsKind>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            m: HOURLY_SEASON,
            croston_alpha: 0.1,
            npts_lambda: 1.0,
            npts_seasonal: true,
            npts_samples: 100,
            ets_candidates: EtsKind::ALL.to_vec(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidConfig("seasonal period must be at least 1".into()));
        }
        if !(self.croston_alpha > 0.0 && self.croston_alpha < 1.0) {
            return Err(Error::InvalidConfig("croston alpha must lie in (0, 1)".into()));
        }
        if !(self.npts_lambda > 0.0) || self.npts_samples == 0 {
            return Err(Error::InvalidConfig("npts needs a positive rate and sample count".into()));
        }
        if self.ets_candidates.is_empty() {
            return Err(Error::InvalidConfig("no ets candidates".into()));
        }
        Ok(())
    }

    pub fn npts_params(&self) -> NptsParams {
        NptsParams {
            lambda: self.npts_lambda,
            seasonal: self.npts_seasonal,
            m: self.m,
            samples: self.npts_samples,
        }
    }
}

/// Fit `baseline` to `history` and forecast `task.horizon` steps.
pub fn forecast_baseline<R: Rng + ?Sized>(
    baseline: Baseline,
    history: &[f64],
    task: &ForecastTask,
    cfg: &BaselineConfig,
    rng: &mut R,
) -> Result<QuantileForecast> {
    cfg.validate()?;
    task.validate()?;
    match baseline {
        Baseline::SeasonalNaive => seasonal_naive(history, task, cfg.m),
        Baseline::CrostonSba => croston_sba(history, task, cfg.croston_alpha),
        Baseline::Npts => npts(history, task, &cfg.npts_params(), rng),
        Baseline::EtsLite => ets_lite(history, task, cfg.m, &cfg.ets_candidates),
    }
}
