//! Token-based probabilistic forecasting of load series, with statistical
//! baselines, scoring and a rolling-origin benchmark harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod augment;
pub mod baselines;
pub mod error;
pub mod forecast;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod series;
pub mod tokenizer;

pub use error::{Error, Result};
pub use forecast::{point_forecast, QuantileForecast};
pub use series::{ForecastTask, TimeSeries};
pub use tokenizer::TokenizerSpec;
