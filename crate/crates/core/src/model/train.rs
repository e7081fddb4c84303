//! AdamW training with per-example gradients reduced in a fixed order.

use ndarray::Zip;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainSpec};
use super::data::TokenWindow;
use super::loss::{cross_entropy_grad, cross_entropy_sum};
use super::network::{backward, forward, forward_with_cache};
use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub initial_heldout_loss: f64,
    pub final_heldout_loss: f64,
    /// Mean training loss per step.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub report: TrainReport,
}

/// Mean loss per non-PAD target over a set of windows.
pub fn mean_loss(params: &ModelParams, cfg: &ModelConfig, windows: &[TokenWindow]) -> Result<f64> {
    let parts = windows
        .par_iter()
        .map(|w| {
            forward(params, cfg, &w.encoder, &w.decoder).map(|logits| cross_entropy_sum(&logits, &w.target))
        })
        .collect::<Result<Vec<_>>>()?;
    let (total, count) = parts.iter().fold((0.0, 0), |(t, c), &(a, b)| (t + a, c + b));
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Loss and gradient of the mean per-token loss over `batch`.
pub fn batch_gradient(params: &ModelParams, cfg: &ModelConfig, batch: &[&TokenWindow]) -> Result<(f64, ModelParams)> {
    let count: usize = batch
        .iter()
        .map(|w| w.target.iter().filter(|&&t| t != crate::tokenizer::PAD).count())
        .sum();
    let norm = count.max(1) as f64;
    let parts = batch
        .par_iter()
        .map(|w| {
            let (logits, cache) = forward_with_cache(params, cfg, &w.encoder, &w.decoder)?;
            let (loss, _) = cross_entropy_sum(&logits, &w.target);
            let dlogits = cross_entropy_grad(&logits, &w.target, norm);
            let mut grad = ModelParams::zeros(cfg);
            backward(params, &cache, &dlogits, &mut grad);
            Ok((loss, grad))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut grad = ModelParams::zeros(cfg);
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grad.add_assign(g);
    }
    Ok((loss / norm, grad))
}

struct AdamW {
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

impl AdamW {
    fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, spec: &TrainSpec, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - spec.beta1.powi(self.t);
        let bc2 = 1.0 - spec.beta2.powi(self.t);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grad.tensors())
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut());
        for ((((_, mut p), (_, g)), (_, mut m)), (_, mut v)) in tensors {
            let decay = if p.ndim() == 2 { spec.weight_decay } else { 0.0 };
            Zip::from(&mut p)
                .and(&g)
                .and(&mut m)
                .and(&mut v)
                .for_each(|p, &g, m, v| {
                    *m = spec.beta1 * *m + (1.0 - spec.beta1) * g;
                    *v = spec.beta2 * *v + (1.0 - spec.beta2) * g * g;
                    let update = (*m / bc1) / ((*v / bc2).sqrt() + spec.eps);
                    *p -= lr * (update + decay * *p);
                });
        }
    }
}

/// Train from a seeded initialisation. Batches are drawn with replacement from
/// `corpus`; `heldout` is scored before and after. Final weights are rounded to
/// `f32`, the checkpoint precision.
pub fn train(
    corpus: &[TokenWindow],
    heldout: &[TokenWindow],
    cfg: &ModelConfig,
    spec: &TrainSpec,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyInput);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| train_inner(corpus, heldout, cfg, spec))
}

fn train_inner(corpus: &[TokenWindow], heldout: &[TokenWindow], cfg: &ModelConfig, spec: &TrainSpec) -> Result<TrainOutcome> {
    let mut params = ModelParams::init(cfg, spec.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let initial_heldout_loss = mean_loss(&params, cfg, heldout)?;
    let mut opt = AdamW::new(&params);
    let mut losses = Vec::with_capacity(spec.steps);
    for step in 0..spec.steps {
        let batch: Vec<&TokenWindow> = (0..spec.batch_size)
            .map(|_| &corpus[rng.random_range(0..corpus.len())])
            .collect();
        let (loss, mut grad) = batch_gradient(&params, cfg, &batch)?;
        if !loss.is_finite() {
            return Err(Error::DivergedLoss { step });
        }
        if let Some(max) = spec.max_grad_norm {
            let norm = grad.sq_norm().sqrt();
            if norm > max {
                grad.scale(max / norm);
            }
        }
        opt.step(&mut params, &grad, spec, spec.lr_at(step));
        if !params.is_finite() {
            return Err(Error::DivergedLoss { step });
        }
        losses.push(loss);
    }
    params.round_to_f32();
    let final_heldout_loss = mean_loss(&params, cfg, heldout)?;
    if !final_heldout_loss.is_finite() {
        return Err(Error::DivergedLoss { step: spec.steps });
    }
    Ok(TrainOutcome {
        params,
        report: TrainReport {
            initial_heldout_loss,
            final_heldout_loss,
            losses,
        },
    })
}
