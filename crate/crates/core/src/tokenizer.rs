//! Mean scaling and bin quantization between real values and tokens.
//!
//! Vocabulary layout: `PAD = 0`, bins `1..=N`, `EOS = N + 1`. The decoder's
//! begin token reuses `PAD`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: u32 = 0;
pub const DEFAULT_BINS: usize = 100;

/// End-of-sequence token for a vocabulary of `n_bins` bins.
pub fn eos(n_bins: usize) -> u32 {
    n_bins as u32 + 1
}

/// Vocabulary size including the two special tokens.
pub fn vocab_size(n_bins: usize) -> usize {
    n_bins + 2
}

/// Affine scaling `scaled = (x - m) / s`. Mean scaling always has `m = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub m: f64,
    pub s: f64,
}

impl ScalingParams {
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.m) / self.s
    }

    pub fn unscale(&self, v: f64) -> f64 {
        v * self.s + self.m
    }
}

/// Divide by the mean absolute value. An all-zero input falls back to `s = 1`.
pub fn mean_scale(values: &[f64]) -> Result<(Vec<f64>, ScalingParams)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut s = values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64;
    if s == 0.0 {
        s = 1.0;
    }
    let params = ScalingParams { m: 0.0, s };
    Ok((values.iter().map(|&v| params.scale(v)).collect(), params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinStrategy {
    /// Evenly spaced edges over `[x_min, x_max]`.
    #[default]
    Uniform,
    /// Edges at empirical quantiles, so bins hold roughly equal counts.
    Percentile,
}

impl std::str::FromStr for BinStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "percentile" => Ok(Self::Percentile),
            other => Err(Error::InvalidConfig(format!("unknown bin strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub x_min: f64,
    pub x_max: f64,
    #[serde(rename = "N")]
    pub n_bins: usize,
    pub strategy: BinStrategy,
    /// All `N + 1` edges; only stored for the percentile strategy.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<f64>,
}

impl BinSpec {
    pub fn uniform(x_min: f64, x_max: f64, n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidConfig("bin count must be positive".into()));
        }
        if !(x_max > x_min) {
            return Err(Error::DegenerateRange(x_min));
        }
        Ok(Self {
            x_min,
            x_max,
            n_bins,
            strategy: BinStrategy::Uniform,
            edges: Vec::new(),
        })
    }

    /// Bin width `(x_max - x_min) / N`.
    pub fn delta(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_bins as f64
    }

    pub fn edge(&self, k: usize) -> f64 {
        match self.strategy {
            BinStrategy::Uniform => {
                if k == self.n_bins {
                    self.x_max
                } else {
                    self.x_min + k as f64 * self.delta()
                }
            }
            BinStrategy::Percentile => self.edges[k],
        }
    }

    /// Token for one scaled value, plus whether it had to be clamped.
    pub fn token(&self, v: f64) -> (u32, bool) {
        if v < self.x_min {
            return (1, true);
        }
        if v >= self.x_max {
            return (self.n_bins as u32, v > self.x_max);
        }
        let k = match self.strategy {
            BinStrategy::Uniform => ((v - self.x_min) / self.delta()).floor() as usize + 1,
            BinStrategy::Percentile => self.edges[1..self.n_bins].partition_point(|&e| e <= v) + 1,
        };
        (k.clamp(1, self.n_bins) as u32, false)
    }

    /// Centre of bin `k` (1-based), in scaled units.
    pub fn center(&self, k: u32) -> f64 {
        match self.strategy {
            BinStrategy::Uniform => self.x_min + (k as f64 - 0.5) * self.delta(),
            BinStrategy::Percentile => {
                let k = k as usize;
                0.5 * (self.edges[k - 1] + self.edges[k])
            }
        }
    }
}

pub fn fit_bins(scaled: &[f64], n_bins: usize, strategy: BinStrategy) -> Result<BinSpec> {
    if scaled.len() < 2 {
        return match scaled.first() {
            Some(&v) => Err(Error::DegenerateRange(v)),
            None => Err(Error::EmptyInput),
        };
    }
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut spec = BinSpec::uniform(lo, hi, n_bins)?;
    if strategy == BinStrategy::Percentile {
        let mut sorted = scaled.to_vec();
        sorted.sort_by(f64::total_cmp);
        spec.strategy = BinStrategy::Percentile;
        spec.edges = (0..=n_bins)
            .map(|k| empirical_quantile(&sorted, k as f64 / n_bins as f64))
            .collect();
        spec.edges[0] = lo;
        spec.edges[n_bins] = hi;
    }
    Ok(spec)
}

/// Linearly interpolated quantile of sorted data (the "type 7" definition).
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Scaling and binning used for one context window. Serializes to
/// `{m, s, x_min, x_max, N, strategy}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizerSpec {
    #[serde(flatten)]
    pub scaling: ScalingParams,
    #[serde(flatten)]
    pub bins: BinSpec,
}

impl TokenizerSpec {
    /// Fit scaling and bins to a context window. A constant context has no
    /// range to bin, so the range is widened by half a unit on each side of
    /// the (scaled) constant.
    pub fn fit(context: &[f64], n_bins: usize, strategy: BinStrategy) -> Result<Self> {
        let (scaled, scaling) = mean_scale(context)?;
        let bins = match fit_bins(&scaled, n_bins, strategy) {
            Ok(b) => b,
            Err(Error::DegenerateRange(v)) => BinSpec::uniform(v - 0.5, v + 0.5, n_bins)?,
            Err(e) => return Err(e),
        };
        Ok(Self { scaling, bins })
    }

    pub fn n_bins(&self) -> usize {
        self.bins.n_bins
    }

    pub fn encode(&self, values: &[f64]) -> TokenSequence {
        let scaled: Vec<f64> = values.iter().map(|&v| self.scaling.scale(v)).collect();
        quantize(&scaled, self.scaling, &self.bins)
    }

    /// Real value represented by a single bin token.
    pub fn token_value(&self, token: u32) -> Result<f64> {
        if token == PAD || token as usize > self.bins.n_bins {
            return Err(Error::SpecialTokenInSpan { token, position: 0 });
        }
        Ok(self.scaling.unscale(self.bins.center(token)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<u32>,
    pub spec: TokenizerSpec,
    /// Values that fell outside `[x_min, x_max]` and were clamped to an edge bin.
    pub clamped: usize,
}

pub fn quantize(scaled: &[f64], scaling: ScalingParams, bins: &BinSpec) -> TokenSequence {
    let mut clamped = 0;
    let tokens = scaled
        .iter()
        .map(|&v| {
            let (t, c) = bins.token(v);
            clamped += c as usize;
            t
        })
        .collect();
    TokenSequence {
        tokens,
        spec: TokenizerSpec {
            scaling,
            bins: bins.clone(),
        },
        clamped,
    }
}

/// Map each token to its bin centre and undo the scaling.
pub fn dequantize(seq: &TokenSequence) -> Result<Vec<f64>> {
    let n = seq.spec.bins.n_bins as u32;
    seq.tokens
        .iter()
        .enumerate()
        .map(|(position, &token)| {
            if token == PAD || token > n {
                Err(Error::SpecialTokenInSpan { token, position })
            } else {
                Ok(seq.spec.scaling.unscale(seq.spec.bins.center(token)))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_scale_examples() {
        let (scaled, p) = mean_scale(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p, ScalingParams { m: 0.0, s: 2.0 });
        assert_eq!(scaled, vec![0.5, 1.0, 1.5]);

        let (scaled, p) = mean_scale(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(p.s, 1.0);
        assert_eq!(scaled, vec![0.0; 3]);

        let (scaled, p) = mean_scale(&[-1.0, 1.0]).unwrap();
        assert_eq!(p.s, 1.0);
        assert_eq!(scaled, vec![-1.0, 1.0]);

        assert!(matches!(mean_scale(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn uniform_edges() {
        let spec = fit_bins(&[0.0, 0.3, 1.0], 4, BinStrategy::Uniform).unwrap();
        let edges: Vec<f64> = (0..=4).map(|k| spec.edge(k)).collect();
        assert_eq!(edges, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(spec.delta(), 0.25);
    }

    #[test]
    fn constant_is_degenerate() {
        assert!(matches!(
            fit_bins(&[2.0, 2.0, 2.0], 4, BinStrategy::Uniform),
            Err(Error::DegenerateRange(_))
        ));
        assert!(matches!(
            fit_bins(&[2.0, 2.0], 4, BinStrategy::Percentile),
            Err(Error::DegenerateRange(_))
        ));
    }

    #[test]
    fn percentile_bins_hold_equal_counts() {
        let data = [1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0];
        let spec = fit_bins(&data, 4, BinStrategy::Percentile).unwrap();
        let seq = quantize(&data, ScalingParams { m: 0.0, s: 1.0 }, &spec);
        let mut counts = [0usize; 4];
        for t in &seq.tokens {
            counts[*t as usize - 1] += 1;
        }
        assert_eq!(counts, [2, 2, 2, 2]);
        assert_eq!(seq.clamped, 0);
    }

    #[test]
    fn quantize_boundaries() {
        let spec = BinSpec::uniform(0.0, 1.0, 4).unwrap();
        assert_eq!(spec.token(0.3), (2, false));
        assert_eq!(spec.token(1.0), (4, false));
        assert_eq!(spec.token(0.0), (1, false));
        assert_eq!(spec.token(0.5), (3, false));
        let seq = quantize(&[-0.2, 0.1, 1.7], ScalingParams { m: 0.0, s: 1.0 }, &spec);
        assert_eq!(seq.tokens, vec![1, 1, 4]);
        assert_eq!(seq.clamped, 2);
    }

    #[test]
    fn dequantize_bin_centre() {
        let spec = BinSpec::uniform(0.0, 1.0, 4).unwrap();
        let seq = TokenSequence {
            tokens: vec![1],
            spec: TokenizerSpec {
                scaling: ScalingParams { m: 0.0, s: 1.0 },
                bins: spec.clone(),
            },
            clamped: 0,
        };
        assert_eq!(dequantize(&seq).unwrap(), vec![0.125]);

        let bad = TokenSequence {
            tokens: vec![2, eos(4), 3],
            ..seq
        };
        assert!(matches!(
            dequantize(&bad),
            Err(Error::SpecialTokenInSpan { token: 5, position: 1 })
        ));
    }

    #[test]
    fn constant_context_is_widened() {
        let spec = TokenizerSpec::fit(&[5.0; 10], 100, BinStrategy::Uniform).unwrap();
        let seq = spec.encode(&[5.0]);
        let back = dequantize(&seq).unwrap()[0];
        assert!((back - 5.0).abs() <= spec.scaling.s * spec.bins.delta() / 2.0 + 1e-12);
    }

    #[test]
    fn spec_json_shape() {
        let spec = TokenizerSpec::fit(&[1.0, 2.0, 3.0], 10, BinStrategy::Uniform).unwrap();
        let json: serde_json::Value = serde_json::to_value(&spec).unwrap();
        let keys: Vec<&str> = json.as_object().unwrap().keys().map(|k| k.as_str()).collect();
        for k in ["m", "s", "x_min", "x_max", "N", "strategy"] {
            assert!(keys.contains(&k), "missing {k} in {json}");
        }
        let back: TokenizerSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }
}
