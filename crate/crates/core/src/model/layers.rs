//! Building blocks of the encoder-decoder, each with a hand-written backward pass.
//!
//! Orientation: tokens are rows, so a projection is `X · W` with `W` of shape
//! `d_in × d_out`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};

use super::params::{AttentionParams, FfnParams};
use crate::error::{Error, Result};

pub const LN_EPS: f64 = 1e-5;

/// Sinusoidal encoding: `sin` on even dimensions, `cos` on odd ones, both at
/// angle `pos / 10000^(2i / d_model)`.
pub fn positional_encoding(pos: usize, d_model: usize) -> Vec<f64> {
    (0..d_model)
        .map(|j| {
            let two_i = (j - j % 2) as f64;
            let angle = pos as f64 / 10000f64.powf(two_i / d_model as f64);
            if j % 2 == 0 {
                angle.sin()
            } else {
                angle.cos()
            }
        })
        .collect()
}

pub fn positional_table(len: usize, d_model: usize) -> Array2<f64> {
    let mut table = Array2::zeros((len, d_model));
    for (pos, mut row) in table.rows_mut().into_iter().enumerate() {
        row.assign(&Array1::from(positional_encoding(pos, d_model)));
    }
    table
}

/// Numerically stable softmax of a slice, in place.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `(x - μ) / (σ + ε) · γ` with population σ; no shift term.
pub fn layer_norm(x: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() || x.len() != gamma.len() {
        return Err(Error::ShapeMismatch(format!(
            "layer norm over {} values with {} scales",
            x.len(),
            gamma.len()
        )));
    }
    let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("shape");
    let (out, _) = layer_norm_rows(&x, &Array1::from(gamma.to_vec()));
    Ok(out.into_raw_vec_and_offset().0)
}

#[derive(Debug, Clone)]
pub struct LayerNormCache {
    centered: Array2<f64>,
    sigma: Array1<f64>,
    normed: Array2<f64>,
}

/// Row-wise layer norm.
pub fn layer_norm_rows(x: &Array2<f64>, gamma: &Array1<f64>) -> (Array2<f64>, LayerNormCache) {
    let n = x.ncols() as f64;
    let mean = x.mean_axis(Axis(1)).expect("non-empty rows");
    let centered = x - &mean.insert_axis(Axis(1));
    let sigma = centered.map_axis(Axis(1), |r| (r.dot(&r) / n).sqrt());
    let denom = sigma.mapv(|s| s + LN_EPS).insert_axis(Axis(1));
    let normed = &centered / &denom;
    let out = &normed * gamma;
    (
        out,
        LayerNormCache {
            centered,
            sigma,
            normed,
        },
    )
}

/// Returns `(dx, dgamma)`.
pub fn layer_norm_rows_backward(
    dout: &Array2<f64>,
    gamma: &Array1<f64>,
    cache: &LayerNormCache,
) -> (Array2<f64>, Array1<f64>) {
    let n = dout.ncols() as f64;
    let dgamma = (dout * &cache.normed).sum_axis(Axis(0));
    let g = dout * gamma;
    let mut dx = Array2::zeros(dout.raw_dim());
    for (((mut dx_row, g_row), c_row), &sigma) in dx
        .rows_mut()
        .into_iter()
        .zip(g.rows())
        .zip(cache.centered.rows())
        .zip(cache.sigma.iter())
    {
        let d = sigma + LN_EPS;
        let g_mean = g_row.sum() / n;
        let gc = g_row.dot(&c_row);
        let coeff = if sigma > 0.0 { gc / (d * d * n * sigma) } else { 0.0 };
        Zip::from(&mut dx_row)
            .and(&g_row)
            .and(&c_row)
            .for_each(|dx, &g, &c| *dx = (g - g_mean) / d - coeff * c);
    }
    (dx, dgamma)
}

/// `F(x) + x`.
pub fn residual(x: &[f64], fx: &[f64]) -> Result<Vec<f64>> {
    if x.len() != fx.len() {
        return Err(Error::ShapeMismatch(format!(
            "residual of {} and {} values",
            x.len(),
            fx.len()
        )));
    }
    Ok(x.iter().zip(fx).map(|(a, b)| a + b).collect())
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

/// Two dense layers with a ReLU after each: `ReLU(ReLU(x·W1 + B1)·W2 + B2)`.
pub fn ffn(x: &[f64], p: &FfnParams) -> Result<Vec<f64>> {
    if x.len() != p.w1.nrows() || p.w1.ncols() != p.b1.len() || p.w2.nrows() != p.b1.len() || p.w2.ncols() != p.b2.len() {
        return Err(Error::ShapeMismatch("feed-forward weights do not chain".into()));
    }
    let x = Array2::from_shape_vec((1, x.len()), x.to_vec()).expect("shape");
    Ok(ffn_rows(&x, p).0.into_raw_vec_and_offset().0)
}

#[derive(Debug, Clone)]
pub struct FfnCache {
    input: Array2<f64>,
    hidden_pre: Array2<f64>,
    hidden: Array2<f64>,
    out_pre: Array2<f64>,
}

impl FfnCache {
    /// Sign pattern of both ReLU inputs.
    pub fn relu_pattern(&self) -> impl Iterator<Item = bool> + '_ {
        self.hidden_pre
            .iter()
            .chain(self.out_pre.iter())
            .map(|&v| v > 0.0)
    }
}

pub fn ffn_rows(x: &Array2<f64>, p: &FfnParams) -> (Array2<f64>, FfnCache) {
    let hidden_pre = x.dot(&p.w1) + &p.b1;
    let hidden = hidden_pre.mapv(relu);
    let out_pre = hidden.dot(&p.w2) + &p.b2;
    let out = out_pre.mapv(relu);
    (
        out,
        FfnCache {
            input: x.clone(),
            hidden_pre,
            hidden,
            out_pre,
        },
    )
}

/// Returns `dx` and accumulates weight gradients into `grad`.
pub fn ffn_rows_backward(dout: &Array2<f64>, p: &FfnParams, cache: &FfnCache, grad: &mut FfnParams) -> Array2<f64> {
    let mut d_out_pre = dout.clone();
    Zip::from(&mut d_out_pre)
        .and(&cache.out_pre)
        .for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
    grad.w2 += &cache.hidden.t().dot(&d_out_pre);
    grad.b2 += &d_out_pre.sum_axis(Axis(0));
    let mut d_hidden = d_out_pre.dot(&p.w2.t());
    Zip::from(&mut d_hidden)
        .and(&cache.hidden_pre)
        .for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0
            }
        });
    grad.w1 += &cache.input.t().dot(&d_hidden);
    grad.b1 += &d_hidden.sum_axis(Axis(0));
    d_hidden.dot(&p.w1.t())
}

/// Which keys each query may attend to.
#[derive(Debug, Clone, Copy, Default)]
pub struct AttnMask<'a> {
    /// Query `i` sees keys `0..=i` only.
    pub causal: bool,
    /// Keys marked `false` (padding) are never attended.
    pub key_valid: Option<&'a [bool]>,
}

impl AttnMask<'_> {
    fn allows(&self, query: usize, key: usize) -> bool {
        (!self.causal || key <= query) && self.key_valid.is_none_or(|v| v[key])
    }
}

#[derive(Debug, Clone)]
pub struct AttnCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention weights per head, `n_queries × n_keys`.
    probs: Vec<Array2<f64>>,
    concat: Array2<f64>,
}

impl AttnCache {
    pub fn probs(&self) -> &[Array2<f64>] {
        &self.probs
    }
}

/// Masked softmax attention for one head.
pub(crate) fn head_probs(q: ArrayView2<f64>, k: ArrayView2<f64>, mask: &AttnMask) -> Array2<f64> {
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut scores = q.dot(&k.t()) * scale;
    for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
        let allowed: Vec<usize> = (0..row.len()).filter(|&j| mask.allows(i, j)).collect();
        if allowed.is_empty() {
            row.fill(0.0);
            continue;
        }
        let mut vals: Vec<f64> = allowed.iter().map(|&j| row[j]).collect();
        softmax_in_place(&mut vals);
        row.fill(0.0);
        for (&j, p) in allowed.iter().zip(vals) {
            row[j] = p;
        }
    }
    scores
}

/// Multi-head attention: queries from `xq`, keys and values from `xkv`.
pub fn attention_rows(
    xq: &Array2<f64>,
    xkv: &Array2<f64>,
    p: &AttentionParams,
    n_heads: usize,
    mask: &AttnMask,
) -> Result<(Array2<f64>, AttnCache)> {
    let d = p.wq.nrows();
    if xq.ncols() != d || xkv.ncols() != d || !d.is_multiple_of(n_heads) {
        return Err(Error::ShapeMismatch(format!(
            "attention inputs of width {}/{} against weights of width {d} with {n_heads} heads",
            xq.ncols(),
            xkv.ncols()
        )));
    }
    if mask.key_valid.is_some_and(|v| v.len() != xkv.nrows()) {
        return Err(Error::ShapeMismatch("key mask length".into()));
    }
    let dh = d / n_heads;
    let q = xq.dot(&p.wq);
    let k = xkv.dot(&p.wk);
    let v = xkv.dot(&p.wv);
    let mut concat = Array2::zeros((xq.nrows(), d));
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let pr = head_probs(q.slice(cols), k.slice(cols), mask);
        concat.slice_mut(cols).assign(&pr.dot(&v.slice(cols)));
        probs.push(pr);
    }
    let out = concat.dot(&p.wo);
    Ok((
        out,
        AttnCache {
            xq: xq.clone(),
            xkv: xkv.clone(),
            q,
            k,
            v,
            probs,
            concat,
        },
    ))
}

/// Returns `(dxq, dxkv)` and accumulates weight gradients into `grad`.
pub fn attention_rows_backward(
    dout: &Array2<f64>,
    p: &AttentionParams,
    cache: &AttnCache,
    grad: &mut AttentionParams,
) -> (Array2<f64>, Array2<f64>) {
    let d = p.wq.nrows();
    let n_heads = cache.probs.len();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();

    grad.wo += &cache.concat.t().dot(dout);
    let d_concat = dout.dot(&p.wo.t());
    let mut dq = Array2::zeros(cache.q.raw_dim());
    let mut dk = Array2::zeros(cache.k.raw_dim());
    let mut dv = Array2::zeros(cache.v.raw_dim());
    for (h, probs) in cache.probs.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let d_head = d_concat.slice(cols);
        let d_probs = d_head.dot(&cache.v.slice(cols).t());
        dv.slice_mut(cols).assign(&probs.t().dot(&d_head));
        // softmax backward: dS = P ⊙ (dP − rowsum(dP ⊙ P))
        let row_dot = (&d_probs * probs).sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_scores = probs * &(&d_probs - &row_dot) * scale;
        dq.slice_mut(cols).assign(&d_scores.dot(&cache.k.slice(cols)));
        dk.slice_mut(cols).assign(&d_scores.t().dot(&cache.q.slice(cols)));
    }
    grad.wq += &cache.xq.t().dot(&dq);
    grad.wk += &cache.xkv.t().dot(&dk);
    grad.wv += &cache.xkv.t().dot(&dv);
    let dxq = dq.dot(&p.wq.t());
    let dxkv = dk.dot(&p.wk.t()) + dv.dot(&p.wv.t());
    (dxq, dxkv)
}

/// Unmasked single-call self-attention over the rows of `x`.
pub fn self_attention(x: &Array2<f64>, p: &AttentionParams, n_heads: usize) -> Result<Array2<f64>> {
    attention_rows(x, x, p, n_heads, &AttnMask::default()).map(|(out, _)| out)
}
