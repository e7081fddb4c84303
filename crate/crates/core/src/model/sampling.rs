//! Autoregressive sampling of token paths, decoded incrementally with a key/value cache.

use ndarray::{s, Array2, Array3, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::data::encode_context;
use super::layers::{ffn_rows, head_probs, layer_norm_rows, positional_encoding, AttnMask};
use super::network::{encode, key_valid};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::series::ForecastTask;
use crate::tokenizer::{eos, PAD};

pub use crate::forecast::point_forecast;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub samples: usize,
    /// Softmax temperature; 0 decodes greedily.
    pub temperature: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            samples: 20,
            temperature: 1.0,
        }
    }
}

/// Decoder state for a batch of paths advanced one token at a time.
pub struct IncrementalDecoder<'a> {
    params: &'a ModelParams,
    n_heads: usize,
    enc_valid: Vec<bool>,
    cross_k: Vec<Array2<f64>>,
    cross_v: Vec<Array2<f64>>,
    /// Per layer: `paths × max_len × d_model`.
    self_k: Vec<Array3<f64>>,
    self_v: Vec<Array3<f64>>,
    pos: usize,
}

impl<'a> IncrementalDecoder<'a> {
    pub fn new(params: &'a ModelParams, cfg: &ModelConfig, enc_tokens: &[u32], paths: usize, max_len: usize) -> Result<Self> {
        if max_len > cfg.horizon_len {
            return Err(Error::LengthExceeded {
                len: max_len,
                limit: cfg.horizon_len,
            });
        }
        let enc_out = encode(params, cfg, enc_tokens)?;
        let d = cfg.d_model;
        let cross_k = params.decoder.iter().map(|l| enc_out.dot(&l.cross_attn.wk)).collect();
        let cross_v = params.decoder.iter().map(|l| enc_out.dot(&l.cross_attn.wv)).collect();
        let cache = || Array3::zeros((paths, max_len, d));
        Ok(Self {
            params,
            n_heads: cfg.n_heads,
            enc_valid: key_valid(enc_tokens),
            cross_k,
            cross_v,
            self_k: (0..cfg.n_dec).map(|_| cache()).collect(),
            self_v: (0..cfg.n_dec).map(|_| cache()).collect(),
            pos: 0,
        })
    }

    /// Feed one token per path; returns logits `paths × vocab` for the next position.
    pub fn step(&mut self, tokens: &[u32]) -> Result<Array2<f64>> {
        let p = self.params;
        let paths = self.self_k.first().map_or(tokens.len(), |c| c.shape()[0]);
        if tokens.len() != paths {
            return Err(Error::ShapeMismatch(format!("{} tokens for {paths} paths", tokens.len())));
        }
        if self.self_k.first().is_some_and(|c| self.pos >= c.shape()[1]) {
            return Err(Error::LengthExceeded {
                len: self.pos + 1,
                limit: self.self_k[0].shape()[1],
            });
        }
        let vocab = p.embedding.nrows();
        if let Some(&token) = tokens.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::TokenOutOfRange { token, vocab });
        }
        let d = p.embedding.ncols();
        let dh = d / self.n_heads;
        let pe = ndarray::Array1::from(positional_encoding(self.pos, d));
        let mut y = Array2::zeros((paths, d));
        for (mut row, &t) in y.rows_mut().into_iter().zip(tokens) {
            row.assign(&(&p.embedding.row(t as usize) + &pe));
        }
        let t = self.pos;
        let cross_mask = AttnMask {
            causal: false,
            key_valid: Some(&self.enc_valid),
        };
        for (l, layer) in p.decoder.iter().enumerate() {
            let (h, _) = layer_norm_rows(&y, &layer.ln_self);
            let q = h.dot(&layer.self_attn.wq);
            self.self_k[l].slice_mut(s![.., t, ..]).assign(&h.dot(&layer.self_attn.wk));
            self.self_v[l].slice_mut(s![.., t, ..]).assign(&h.dot(&layer.self_attn.wv));
            let mut ctx = Array2::zeros((paths, d));
            for sidx in 0..paths {
                let keys = self.self_k[l].slice(s![sidx, ..=t, ..]);
                let values = self.self_v[l].slice(s![sidx, ..=t, ..]);
                for head in 0..self.n_heads {
                    let cols = head * dh..(head + 1) * dh;
                    let qh = q.slice(s![sidx..=sidx, cols.clone()]);
                    let pr = head_probs(qh, keys.slice(s![.., cols.clone()]), &AttnMask::default());
                    ctx.slice_mut(s![sidx..=sidx, cols.clone()])
                        .assign(&pr.dot(&values.slice(s![.., cols])));
                }
            }
            y += &ctx.dot(&layer.self_attn.wo);

            let (h, _) = layer_norm_rows(&y, &layer.ln_cross);
            let q = h.dot(&layer.cross_attn.wq);
            let mut ctx = Array2::zeros((paths, d));
            for head in 0..self.n_heads {
                let cols = s![.., head * dh..(head + 1) * dh];
                let pr = head_probs(q.slice(cols), self.cross_k[l].slice(cols), &cross_mask);
                ctx.slice_mut(cols).assign(&pr.dot(&self.cross_v[l].slice(cols)));
            }
            y += &ctx.dot(&layer.cross_attn.wo);

            let (h, _) = layer_norm_rows(&y, &layer.ln_ffn);
            y += &ffn_rows(&h, &layer.ffn).0;
        }
        self.pos += 1;
        let (out, _) = layer_norm_rows(&y, &p.dec_norm);
        Ok(out.dot(&p.output))
    }
}

/// Pick a bin token from one logit row; PAD and EOS are never emitted.
fn choose<R: Rng + ?Sized>(logits: ndarray::ArrayView1<f64>, n_bins: usize, temperature: f64, rng: &mut R) -> u32 {
    let bins = logits.slice(s![1..=n_bins]);
    if temperature <= 0.0 {
        let mut best = 0;
        for (i, &v) in bins.iter().enumerate() {
            if v > bins[best] {
                best = i;
            }
        }
        return best as u32 + 1;
    }
    let max = bins.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let weights: Vec<f64> = bins.iter().map(|&v| ((v - max) / temperature).exp()).collect();
    let dist = WeightedIndex::new(&weights).expect("max logit has weight 1");
    dist.sample(rng) as u32 + 1
}

/// Sample `opts.samples` token paths of length `task.horizon` and summarise
/// them as empirical quantiles on `task.quantiles`.
pub fn sample_forecast<R: Rng + ?Sized>(
    params: &ModelParams,
    cfg: &ModelConfig,
    context: &[f64],
    task: &ForecastTask,
    opts: SampleOptions,
    rng: &mut R,
) -> Result<QuantileForecast> {
    task.validate()?;
    if opts.samples == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1".into()));
    }
    if !(opts.temperature >= 0.0) {
        return Err(Error::InvalidConfig("temperature must be non-negative".into()));
    }
    let (enc_tokens, spec) = encode_context(context, cfg)?;
    debug_assert_eq!(*enc_tokens.last().unwrap(), eos(cfg.n_bins));
    let mut decoder = IncrementalDecoder::new(params, cfg, &enc_tokens, opts.samples, task.horizon)?;
    let mut current = vec![PAD; opts.samples];
    let mut paths = vec![Vec::with_capacity(task.horizon); opts.samples];
    for _ in 0..task.horizon {
        let logits = decoder.step(&current)?;
        for ((row, cur), path) in logits.axis_iter(Axis(0)).zip(current.iter_mut()).zip(paths.iter_mut()) {
            *cur = choose(row, cfg.n_bins, opts.temperature, rng);
            path.push(spec.token_value(*cur)?);
        }
    }
    let mut qf = QuantileForecast::from_samples(&task.quantiles, paths)?;
    qf.tokenizer = Some(spec);
    Ok(qf)
}
