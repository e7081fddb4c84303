//! The encoder-decoder token model: layers, training and sampling.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod gradcheck;
pub mod layers;
pub mod loss;
pub mod network;
pub mod params;
pub mod sampling;
pub mod train;

pub use checkpoint::Checkpoint;
pub use config::{ModelConfig, TrainSpec};
pub use data::TokenWindow;
pub use gradcheck::{grad_check, GradCheckReport};
pub use layers::{ffn, layer_norm, positional_encoding, residual, self_attention};
pub use loss::cross_entropy_loss;
pub use network::{forward, softmax_rows};
pub use params::ModelParams;
pub use sampling::{sample_forecast, SampleOptions};
pub use train::{train, TrainOutcome, TrainReport};
