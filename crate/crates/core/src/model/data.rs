//! Turning real-valued series into encoder/decoder training windows.

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::tokenizer::{eos, TokenizerSpec, PAD};

/// One teacher-forced training example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenWindow {
    /// Context tokens followed by EOS.
    pub encoder: Vec<u32>,
    /// Begin token followed by all but the last target token.
    pub decoder: Vec<u32>,
    pub target: Vec<u32>,
}

/// Encoder tokens for a context: the last `context_len - 1` values,
/// tokenized with a spec fitted to them, then EOS.
pub fn encode_context(context: &[f64], cfg: &ModelConfig) -> Result<(Vec<u32>, TokenizerSpec)> {
    let keep = context.len().min(cfg.context_len - 1);
    let context = &context[context.len() - keep..];
    let spec = TokenizerSpec::fit(context, cfg.n_bins, cfg.strategy)?;
    let mut tokens = spec.encode(context).tokens;
    tokens.push(eos(cfg.n_bins));
    Ok((tokens, spec))
}

/// Right-shift targets behind the begin token.
pub fn decoder_input(target: &[u32]) -> Vec<u32> {
    std::iter::once(PAD)
        .chain(target.iter().copied().take(target.len().saturating_sub(1)))
        .collect()
}

impl TokenWindow {
    /// Future values are tokenized with the context's spec, clamping when out of range.
    pub fn from_values(context: &[f64], future: &[f64], cfg: &ModelConfig) -> Result<Self> {
        if future.is_empty() {
            return Err(Error::EmptyInput);
        }
        if future.len() > cfg.horizon_len {
            return Err(Error::LengthExceeded {
                len: future.len(),
                limit: cfg.horizon_len,
            });
        }
        let (encoder, spec) = encode_context(context, cfg)?;
        let target = spec.encode(future).tokens;
        Ok(Self {
            encoder,
            decoder: decoder_input(&target),
            target,
        })
    }
}

/// All `(context, future)` windows of the given lengths from each series,
/// with origins `stride` apart.
pub fn windows_from_series(
    series: &[TimeSeries],
    context_len: usize,
    horizon: usize,
    stride: usize,
    cfg: &ModelConfig,
) -> Result<Vec<TokenWindow>> {
    if stride == 0 || context_len == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("window lengths and stride must be positive".into()));
    }
    let mut out = Vec::new();
    for ts in series {
        let v = &ts.values;
        let mut origin = context_len;
        while origin + horizon <= v.len() {
            out.push(TokenWindow::from_values(
                &v[origin - context_len..origin],
                &v[origin..origin + horizon],
                cfg,
            )?);
            origin += stride;
        }
    }
    if out.is_empty() {
        return Err(Error::SeriesTooShort {
            needed: context_len + horizon,
            actual: series.iter().map(TimeSeries::len).max().unwrap_or(0),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_layout() {
        let cfg = ModelConfig {
            n_bins: 4,
            ..Default::default()
        };
        let w = TokenWindow::from_values(&[0.0, 1.0, 2.0, 3.0, 4.0], &[4.0, 0.0, 9.0], &cfg).unwrap();
        assert_eq!(w.encoder, vec![1, 2, 3, 4, 4, 5]);
        assert_eq!(w.target, vec![4, 1, 4]);
        assert_eq!(w.decoder, vec![0, 4, 1]);
    }

    #[test]
    fn context_is_truncated_to_limit() {
        let cfg = ModelConfig {
            context_len: 4,
            n_bins: 10,
            ..Default::default()
        };
        let (tokens, _) = encode_context(&[5.0, 1.0, 2.0, 3.0, 4.0], &cfg).unwrap();
        assert_eq!(tokens.len(), 4);
        assert_eq!(tokens[3], 11);
    }
}
