//! Pre-norm encoder-decoder: forward pass, cached activations, and backward pass.

use ndarray::{Array1, Array2, Axis};

use super::config::ModelConfig;
use super::layers::{
    attention_rows, attention_rows_backward, ffn_rows, ffn_rows_backward, layer_norm_rows,
    layer_norm_rows_backward, positional_table, AttnCache, AttnMask, FfnCache, LayerNormCache,
};
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::tokenizer::PAD;

#[derive(Debug, Clone)]
struct EncoderCache {
    ln_attn: LayerNormCache,
    attn: AttnCache,
    ln_ffn: LayerNormCache,
    ffn: FfnCache,
}

#[derive(Debug, Clone)]
struct DecoderCache {
    ln_self: LayerNormCache,
    self_attn: AttnCache,
    ln_cross: LayerNormCache,
    cross_attn: AttnCache,
    ln_ffn: LayerNormCache,
    ffn: FfnCache,
}

/// Activations kept from a forward pass for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    enc_tokens: Vec<u32>,
    dec_tokens: Vec<u32>,
    encoder: Vec<EncoderCache>,
    enc_norm: LayerNormCache,
    decoder: Vec<DecoderCache>,
    dec_norm: LayerNormCache,
    dec_out: Array2<f64>,
}

impl ForwardCache {
    /// Sign pattern of every ReLU input in the network.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.encoder
            .iter()
            .flat_map(|l| l.ffn.relu_pattern())
            .chain(self.decoder.iter().flat_map(|l| l.ffn.relu_pattern()))
            .collect()
    }
}

fn check_tokens(tokens: &[u32], limit: usize, vocab: usize) -> Result<()> {
    if tokens.is_empty() {
        return Err(Error::EmptyInput);
    }
    if tokens.len() > limit {
        return Err(Error::LengthExceeded {
            len: tokens.len(),
            limit,
        });
    }
    if let Some(&token) = tokens.iter().find(|&&t| t as usize >= vocab) {
        return Err(Error::TokenOutOfRange { token, vocab });
    }
    Ok(())
}

pub(crate) fn embed(params: &ModelParams, tokens: &[u32]) -> Array2<f64> {
    let d = params.embedding.ncols();
    let mut x = positional_table(tokens.len(), d);
    for (mut row, &t) in x.rows_mut().into_iter().zip(tokens) {
        row += &params.embedding.row(t as usize);
    }
    x
}

/// Encoder keys that carry information; PAD positions are never attended.
pub fn key_valid(enc_tokens: &[u32]) -> Vec<bool> {
    enc_tokens.iter().map(|&t| t != PAD).collect()
}

fn encode_cached(
    params: &ModelParams,
    cfg: &ModelConfig,
    enc_tokens: &[u32],
) -> Result<(Array2<f64>, Vec<EncoderCache>, LayerNormCache)> {
    let valid = key_valid(enc_tokens);
    let mask = AttnMask {
        causal: false,
        key_valid: Some(&valid),
    };
    let mut x = embed(params, enc_tokens);
    let mut caches = Vec::with_capacity(params.encoder.len());
    for layer in &params.encoder {
        let (h, ln_attn) = layer_norm_rows(&x, &layer.ln_attn);
        let (a, attn) = attention_rows(&h, &h, &layer.attn, cfg.n_heads, &mask)?;
        x += &a;
        let (h, ln_ffn) = layer_norm_rows(&x, &layer.ln_ffn);
        let (f, ffn) = ffn_rows(&h, &layer.ffn);
        x += &f;
        caches.push(EncoderCache {
            ln_attn,
            attn,
            ln_ffn,
            ffn,
        });
    }
    let (out, norm) = layer_norm_rows(&x, &params.enc_norm);
    Ok((out, caches, norm))
}

/// Encoder output rows for `enc_tokens`.
pub fn encode(params: &ModelParams, cfg: &ModelConfig, enc_tokens: &[u32]) -> Result<Array2<f64>> {
    check_tokens(enc_tokens, cfg.context_len, cfg.vocab())?;
    encode_cached(params, cfg, enc_tokens).map(|(out, _, _)| out)
}

/// Logits `dec_len × vocab` together with the cache needed for backprop.
pub fn forward_with_cache(
    params: &ModelParams,
    cfg: &ModelConfig,
    enc_tokens: &[u32],
    dec_tokens: &[u32],
) -> Result<(Array2<f64>, ForwardCache)> {
    check_tokens(enc_tokens, cfg.context_len, cfg.vocab())?;
    check_tokens(dec_tokens, cfg.horizon_len, cfg.vocab())?;
    let (enc_out, encoder, enc_norm) = encode_cached(params, cfg, enc_tokens)?;

    let valid = key_valid(enc_tokens);
    let causal = AttnMask {
        causal: true,
        key_valid: None,
    };
    let cross = AttnMask {
        causal: false,
        key_valid: Some(&valid),
    };
    let mut y = embed(params, dec_tokens);
    let mut decoder = Vec::with_capacity(params.decoder.len());
    for layer in &params.decoder {
        let (h, ln_self) = layer_norm_rows(&y, &layer.ln_self);
        let (a, self_attn) = attention_rows(&h, &h, &layer.self_attn, cfg.n_heads, &causal)?;
        y += &a;
        let (h, ln_cross) = layer_norm_rows(&y, &layer.ln_cross);
        let (c, cross_attn) = attention_rows(&h, &enc_out, &layer.cross_attn, cfg.n_heads, &cross)?;
        y += &c;
        let (h, ln_ffn) = layer_norm_rows(&y, &layer.ln_ffn);
        let (f, ffn) = ffn_rows(&h, &layer.ffn);
        y += &f;
        decoder.push(DecoderCache {
            ln_self,
            self_attn,
            ln_cross,
            cross_attn,
            ln_ffn,
            ffn,
        });
    }
    let (dec_out, dec_norm) = layer_norm_rows(&y, &params.dec_norm);
    let logits = dec_out.dot(&params.output);
    Ok((
        logits,
        ForwardCache {
            enc_tokens: enc_tokens.to_vec(),
            dec_tokens: dec_tokens.to_vec(),
            encoder,
            enc_norm,
            decoder,
            dec_norm,
            dec_out,
        },
    ))
}

pub fn forward(params: &ModelParams, cfg: &ModelConfig, enc_tokens: &[u32], dec_tokens: &[u32]) -> Result<Array2<f64>> {
    forward_with_cache(params, cfg, enc_tokens, dec_tokens).map(|(logits, _)| logits)
}

fn scatter_embedding(grad: &mut Array2<f64>, tokens: &[u32], dx: &Array2<f64>) {
    for (&t, row) in tokens.iter().zip(dx.rows()) {
        let mut g = grad.row_mut(t as usize);
        g += &row;
    }
}

fn add_gamma(acc: &mut Array1<f64>, g: Array1<f64>) {
    *acc += &g;
}

/// Accumulate the gradient of `Σ dlogits ⊙ logits` into `grad`.
pub fn backward(params: &ModelParams, cache: &ForwardCache, dlogits: &Array2<f64>, grad: &mut ModelParams) {
    grad.output += &cache.dec_out.t().dot(dlogits);
    let d_dec_out = dlogits.dot(&params.output.t());
    let (mut dy, dg) = layer_norm_rows_backward(&d_dec_out, &params.dec_norm, &cache.dec_norm);
    add_gamma(&mut grad.dec_norm, dg);

    let enc_rows = cache.enc_tokens.len();
    let mut d_enc_out = Array2::zeros((enc_rows, params.embedding.ncols()));
    for ((layer, lc), lg) in params
        .decoder
        .iter()
        .zip(&cache.decoder)
        .zip(grad.decoder.iter_mut())
        .rev()
    {
        let dh = ffn_rows_backward(&dy, &layer.ffn, &lc.ffn, &mut lg.ffn);
        let (dln, dg) = layer_norm_rows_backward(&dh, &layer.ln_ffn, &lc.ln_ffn);
        add_gamma(&mut lg.ln_ffn, dg);
        dy += &dln;

        let (dq, dkv) = attention_rows_backward(&dy, &layer.cross_attn, &lc.cross_attn, &mut lg.cross_attn);
        d_enc_out += &dkv;
        let (dln, dg) = layer_norm_rows_backward(&dq, &layer.ln_cross, &lc.ln_cross);
        add_gamma(&mut lg.ln_cross, dg);
        dy += &dln;

        let (dq, dkv) = attention_rows_backward(&dy, &layer.self_attn, &lc.self_attn, &mut lg.self_attn);
        let (dln, dg) = layer_norm_rows_backward(&(dq + dkv), &layer.ln_self, &lc.ln_self);
        add_gamma(&mut lg.ln_self, dg);
        dy += &dln;
    }
    scatter_embedding(&mut grad.embedding, &cache.dec_tokens, &dy);

    let (mut dx, dg) = layer_norm_rows_backward(&d_enc_out, &params.enc_norm, &cache.enc_norm);
    add_gamma(&mut grad.enc_norm, dg);
    for ((layer, lc), lg) in params
        .encoder
        .iter()
        .zip(&cache.encoder)
        .zip(grad.encoder.iter_mut())
        .rev()
    {
        let dh = ffn_rows_backward(&dx, &layer.ffn, &lc.ffn, &mut lg.ffn);
        let (dln, dg) = layer_norm_rows_backward(&dh, &layer.ln_ffn, &lc.ln_ffn);
        add_gamma(&mut lg.ln_ffn, dg);
        dx += &dln;

        let (dq, dkv) = attention_rows_backward(&dx, &layer.attn, &lc.attn, &mut lg.attn);
        let (dln, dg) = layer_norm_rows_backward(&(dq + dkv), &layer.ln_attn, &lc.ln_attn);
        add_gamma(&mut lg.ln_attn, dg);
        dx += &dln;
    }
    scatter_embedding(&mut grad.embedding, &cache.enc_tokens, &dx);
}

/// Row-wise softmax of a logit matrix.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for mut row in p.axis_iter_mut(Axis(0)) {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
    p
}
