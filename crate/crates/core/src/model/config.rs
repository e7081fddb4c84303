use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenizer::{vocab_size, BinStrategy, DEFAULT_BINS};

/// Shape of the encoder-decoder token model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_enc: usize,
    pub n_dec: usize,
    /// Number of value bins; the vocabulary adds PAD and EOS.
    pub n_bins: usize,
    pub strategy: BinStrategy,
    /// Maximum encoder tokens, including the trailing EOS.
    pub context_len: usize,
    /// Maximum decoder tokens.
    pub horizon_len: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            d_ff: 128,
            n_enc: 2,
            n_dec: 2,
            n_bins: DEFAULT_BINS,
            strategy: BinStrategy::Uniform,
            context_len: 512,
            horizon_len: 64,
        }
    }
}

impl ModelConfig {
    pub fn vocab(&self) -> usize {
        vocab_size(self.n_bins)
    }

    /// Per-head query width.
    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.d_model,
            self.n_heads,
            self.d_ff,
            self.n_enc,
            self.n_dec,
            self.n_bins,
            self.context_len,
            self.horizon_len,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("all model dimensions must be at least 1".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidConfig(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.context_len < 2 {
            return Err(Error::InvalidConfig("context_len must leave room for EOS".into()));
        }
        Ok(())
    }
}

/// Optimiser and schedule for [`crate::model::train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    /// Initial learning rate; decays linearly to zero over `steps`.
    pub lr: f64,
    /// Decoupled weight decay, applied to weight matrices only.
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Global gradient-norm clip.
    pub max_grad_norm: Option<f64>,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Worker threads for per-example gradients; the reduction order is fixed.
    #[serde(default = "one")]
    pub threads: usize,
}

fn one() -> usize {
    1
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm: Some(1.0),
            steps: 1000,
            batch_size: 16,
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidConfig("training steps must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive and weight decay non-negative".into()));
        }
        Ok(())
    }

    /// Learning rate at `step`; `lr_at(steps) == 0`.
    pub fn lr_at(&self, step: usize) -> f64 {
        let remaining = self.steps.saturating_sub(step) as f64;
        self.lr * remaining / self.steps as f64
    }
}
