//! Configuration, benchmark runs, timing and training pipeline.

pub mod bench;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod timing;

pub use bench::{dm_table, dm_text, run_benchmark, BenchmarkRun, RunRecord};
pub use config::{read_config, BenchmarkConfig, TrainConfig};
