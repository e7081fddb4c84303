use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    /// Projection applied to the concatenated heads.
    pub wo: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderLayer {
    pub ln_attn: Array1<f64>,
    pub attn: AttentionParams,
    pub ln_ffn: Array1<f64>,
    pub ffn: FfnParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayer {
    pub ln_self: Array1<f64>,
    pub self_attn: AttentionParams,
    pub ln_cross: Array1<f64>,
    pub cross_attn: AttentionParams,
    pub ln_ffn: Array1<f64>,
    pub ffn: FfnParams,
}

/// Every weight of the model. The same type doubles as a gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Shared token embedding, `vocab × d_model`.
    pub embedding: Array2<f64>,
    pub encoder: Vec<EncoderLayer>,
    pub enc_norm: Array1<f64>,
    pub decoder: Vec<DecoderLayer>,
    pub dec_norm: Array1<f64>,
    /// Logit projection, `d_model × vocab`.
    pub output: Array2<f64>,
}

struct Init {
    rng: ChaCha8Rng,
    zero: bool,
}

impl Init {
    fn matrix(&mut self, rows: usize, cols: usize, std: f64) -> Array2<f64> {
        if self.zero {
            return Array2::zeros((rows, cols));
        }
        let normal = Normal::new(0.0, std).expect("finite std");
        Array2::from_shape_simple_fn((rows, cols), || normal.sample(&mut self.rng))
    }

    fn fan_in(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        self.matrix(rows, cols, (1.0 / rows as f64).sqrt())
    }

    fn gamma(&self, d: usize) -> Array1<f64> {
        if self.zero {
            Array1::zeros(d)
        } else {
            Array1::ones(d)
        }
    }

    fn attention(&mut self, d: usize) -> AttentionParams {
        AttentionParams {
            wq: self.fan_in(d, d),
            wk: self.fan_in(d, d),
            wv: self.fan_in(d, d),
            wo: self.fan_in(d, d),
        }
    }

    fn ffn(&mut self, d: usize, d_ff: usize) -> FfnParams {
        FfnParams {
            w1: self.fan_in(d, d_ff),
            b1: Array1::zeros(d_ff),
            w2: self.fan_in(d_ff, d),
            b2: Array1::zeros(d),
        }
    }

    fn build(&mut self, cfg: &ModelConfig) -> ModelParams {
        let d = cfg.d_model;
        let embedding = self.matrix(cfg.vocab(), d, 0.5);
        let encoder = (0..cfg.n_enc)
            .map(|_| EncoderLayer {
                ln_attn: self.gamma(d),
                attn: self.attention(d),
                ln_ffn: self.gamma(d),
                ffn: self.ffn(d, cfg.d_ff),
            })
            .collect();
        let decoder = (0..cfg.n_dec)
            .map(|_| DecoderLayer {
                ln_self: self.gamma(d),
                self_attn: self.attention(d),
                ln_cross: self.gamma(d),
                cross_attn: self.attention(d),
                ln_ffn: self.gamma(d),
                ffn: self.ffn(d, cfg.d_ff),
            })
            .collect();
        ModelParams {
            embedding,
            encoder,
            enc_norm: self.gamma(d),
            decoder,
            dec_norm: self.gamma(d),
            output: self.fan_in(d, cfg.vocab()),
        }
    }
}

impl ModelParams {
    /// Seeded random initialisation: fan-in scaled normal weights, unit gammas, zero biases.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
            zero: false,
        }
        .build(cfg)
    }

    /// All-zero tensors with the shapes of `cfg`.
    pub fn zeros(cfg: &ModelConfig) -> Self {
        Init {
            rng: ChaCha8Rng::seed_from_u64(0),
            zero: true,
        }
        .build(cfg)
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.scale(0.0);
        z
    }

    /// Named views of every tensor, in checkpoint order.
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view().into_dyn())];
        for (i, l) in self.encoder.iter().enumerate() {
            let p = format!("encoder.{i}");
            out.push((format!("{p}.ln_attn"), l.ln_attn.view().into_dyn()));
            attention_views(&mut out, &format!("{p}.attn"), &l.attn);
            out.push((format!("{p}.ln_ffn"), l.ln_ffn.view().into_dyn()));
            ffn_views(&mut out, &format!("{p}.ffn"), &l.ffn);
        }
        out.push(("enc_norm".into(), self.enc_norm.view().into_dyn()));
        for (i, l) in self.decoder.iter().enumerate() {
            let p = format!("decoder.{i}");
            out.push((format!("{p}.ln_self"), l.ln_self.view().into_dyn()));
            attention_views(&mut out, &format!("{p}.self_attn"), &l.self_attn);
            out.push((format!("{p}.ln_cross"), l.ln_cross.view().into_dyn()));
            attention_views(&mut out, &format!("{p}.cross_attn"), &l.cross_attn);
            out.push((format!("{p}.ln_ffn"), l.ln_ffn.view().into_dyn()));
            ffn_views(&mut out, &format!("{p}.ffn"), &l.ffn);
        }
        out.push(("dec_norm".into(), self.dec_norm.view().into_dyn()));
        out.push(("output".into(), self.output.view().into_dyn()));
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![("embedding".to_string(), self.embedding.view_mut().into_dyn())];
        for (i, l) in self.encoder.iter_mut().enumerate() {
            let p = format!("encoder.{i}");
            out.push((format!("{p}.ln_attn"), l.ln_attn.view_mut().into_dyn()));
            attention_views_mut(&mut out, &format!("{p}.attn"), &mut l.attn);
            out.push((format!("{p}.ln_ffn"), l.ln_ffn.view_mut().into_dyn()));
            ffn_views_mut(&mut out, &format!("{p}.ffn"), &mut l.ffn);
        }
        out.push(("enc_norm".into(), self.enc_norm.view_mut().into_dyn()));
        for (i, l) in self.decoder.iter_mut().enumerate() {
            let p = format!("decoder.{i}");
            out.push((format!("{p}.ln_self"), l.ln_self.view_mut().into_dyn()));
            attention_views_mut(&mut out, &format!("{p}.self_attn"), &mut l.self_attn);
            out.push((format!("{p}.ln_cross"), l.ln_cross.view_mut().into_dyn()));
            attention_views_mut(&mut out, &format!("{p}.cross_attn"), &mut l.cross_attn);
            out.push((format!("{p}.ln_ffn"), l.ln_ffn.view_mut().into_dyn()));
            ffn_views_mut(&mut out, &format!("{p}.ffn"), &mut l.ffn);
        }
        out.push(("dec_norm".into(), self.dec_norm.view_mut().into_dyn()));
        out.push(("output".into(), self.output.view_mut().into_dyn()));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &ModelParams) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Round every entry to the nearest `f32`, the checkpoint storage precision.
    pub fn round_to_f32(&mut self) {
        for (_, mut t) in self.tensors_mut() {
            t.mapv_inplace(|v| v as f32 as f64);
        }
    }

    pub fn get(&self, tensor: usize, index: usize) -> f64 {
        let views = self.tensors();
        views[tensor].1.iter().nth(index).copied().expect("index in range")
    }

    pub fn set(&mut self, tensor: usize, index: usize, value: f64) {
        let mut views = self.tensors_mut();
        *views[tensor].1.iter_mut().nth(index).expect("index in range") = value;
    }
}

fn attention_views<'a>(out: &mut Vec<(String, ArrayViewD<'a, f64>)>, p: &str, a: &'a AttentionParams) {
    out.push((format!("{p}.wq"), a.wq.view().into_dyn()));
    out.push((format!("{p}.wk"), a.wk.view().into_dyn()));
    out.push((format!("{p}.wv"), a.wv.view().into_dyn()));
    out.push((format!("{p}.wo"), a.wo.view().into_dyn()));
}

fn ffn_views<'a>(out: &mut Vec<(String, ArrayViewD<'a, f64>)>, p: &str, f: &'a FfnParams) {
    out.push((format!("{p}.w1"), f.w1.view().into_dyn()));
    out.push((format!("{p}.b1"), f.b1.view().into_dyn()));
    out.push((format!("{p}.w2"), f.w2.view().into_dyn()));
    out.push((format!("{p}.b2"), f.b2.view().into_dyn()));
}

fn attention_views_mut<'a>(out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>, p: &str, a: &'a mut AttentionParams) {
    out.push((format!("{p}.wq"), a.wq.view_mut().into_dyn()));
    out.push((format!("{p}.wk"), a.wk.view_mut().into_dyn()));
    out.push((format!("{p}.wv"), a.wv.view_mut().into_dyn()));
    out.push((format!("{p}.wo"), a.wo.view_mut().into_dyn()));
}

fn ffn_views_mut<'a>(out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>, p: &str, f: &'a mut FfnParams) {
    out.push((format!("{p}.w1"), f.w1.view_mut().into_dyn()));
    out.push((format!("{p}.b1"), f.b1.view_mut().into_dyn()));
    out.push((format!("{p}.w2"), f.w2.view_mut().into_dyn()));
    out.push((format!("{p}.b2"), f.b2.view_mut().into_dyn()));
}
