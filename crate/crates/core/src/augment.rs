//! TSMixup: new training series as convex combinations of mean-scaled
//! sub-sequences drawn from a pool.

use chrono::{TimeZone, Utc};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::tokenizer::mean_scale;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixupSpec {
    /// Number of sub-sequences combined per output (2 or 3).
    pub k: usize,
    /// Sub-sequence length in steps.
    pub len: usize,
    /// Symmetric Dirichlet concentration for the mixing weights.
    pub concentration: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for MixupSpec {
    fn default() -> Self {
        Self {
            k: 3,
            len: 256,
            concentration: 1.5,
            count: 2000,
            seed: 0,
        }
    }
}

impl MixupSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.k) {
            return Err(Error::InvalidConfig(format!("mixup k must be 2 or 3, got {}", self.k)));
        }
        if self.len < 2 {
            return Err(Error::SubsequenceTooShort { len: self.len });
        }
        if self.count == 0 {
            return Err(Error::InvalidConfig("mixup count must be at least 1".into()));
        }
        if !(self.concentration > 0.0) {
            return Err(Error::InvalidConfig("mixup concentration must be positive".into()));
        }
        Ok(())
    }
}

/// One mixed series together with the weights and scaled sources behind it.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub values: Vec<f64>,
    pub weights: Vec<f64>,
    pub sources: Vec<Vec<f64>>,
}

/// `out[j] = Σ_i weights[i] · subs[i][j]`.
pub fn mix_subsequences(subs: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    let len = subs.first().map(Vec::len).ok_or(Error::EmptyInput)?;
    if subs.len() != weights.len() || subs.iter().any(|s| s.len() != len) {
        return Err(Error::ShapeMismatch(
            "sub-sequences and weights must agree in count and length".into(),
        ));
    }
    Ok((0..len)
        .map(|j| subs.iter().zip(weights).map(|(s, w)| w * s[j]).sum())
        .collect())
}

/// Draw weights from a symmetric Dirichlet law via normalised Gamma variates.
pub fn sample_weights<R: Rng + ?Sized>(k: usize, concentration: f64, rng: &mut R) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidConfig(format!("weight law: {e}")))?;
    loop {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 {
            return Ok(draws.into_iter().map(|g| g / total).collect());
        }
    }
}

pub fn ts_mixup_detailed<R: Rng + ?Sized>(pool: &[TimeSeries], spec: &MixupSpec, rng: &mut R) -> Result<Mixture> {
    if spec.len < 2 {
        return Err(Error::SubsequenceTooShort { len: spec.len });
    }
    let eligible: Vec<&TimeSeries> = pool.iter().filter(|s| s.len() >= spec.len).collect();
    if eligible.len() < spec.k {
        return Err(Error::PoolTooSmall {
            needed: spec.k,
            actual: eligible.len(),
        });
    }
    let picks = sample(rng, eligible.len(), spec.k);
    let mut sources = Vec::with_capacity(spec.k);
    for idx in picks.iter() {
        let src = eligible[idx];
        let offset = rng.random_range(0..=src.len() - spec.len);
        let (scaled, _) = mean_scale(&src.values[offset..offset + spec.len])?;
        sources.push(scaled);
    }
    let weights = sample_weights(spec.k, spec.concentration, rng)?;
    let values = mix_subsequences(&sources, &weights)?;
    Ok(Mixture {
        values,
        weights,
        sources,
    })
}

pub fn ts_mixup<R: Rng + ?Sized>(pool: &[TimeSeries], spec: &MixupSpec, rng: &mut R) -> Result<TimeSeries> {
    let mix = ts_mixup_detailed(pool, spec, rng)?;
    TimeSeries::hourly("mixup", corpus_epoch(), mix.values)
}

fn corpus_epoch() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap()
}

/// RNG for output `index`: its own ChaCha stream under the master seed.
pub fn output_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// `spec.count` independent mixes. Identical for any thread count.
pub fn generate_corpus(pool: &[TimeSeries], spec: &MixupSpec) -> Result<Vec<TimeSeries>> {
    spec.validate()?;
    (0..spec.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = output_rng(spec.seed, i);
            let mix = ts_mixup_detailed(pool, spec, &mut rng)?;
            TimeSeries::hourly(format!("mix-{i:05}"), corpus_epoch(), mix.values)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sine(period: f64, n: usize, phase: f64) -> TimeSeries {
        let v = (0..n)
            .map(|t| 10.0 + 3.0 * (2.0 * std::f64::consts::PI * (t as f64 + phase) / period).sin())
            .collect();
        TimeSeries::hourly(format!("p{period}"), corpus_epoch(), v).unwrap()
    }

    #[test]
    fn identity_weight_returns_first_source() {
        let subs = vec![vec![0.2, 0.8, 1.1], vec![5.0, 6.0, 7.0]];
        assert_eq!(mix_subsequences(&subs, &[1.0, 0.0]).unwrap(), subs[0]);
    }

    #[test]
    fn half_half_mix() {
        let subs = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        assert_eq!(mix_subsequences(&subs, &[0.5, 0.5]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn pool_too_small() {
        let spec = MixupSpec {
            k: 2,
            len: 8,
            count: 1,
            ..Default::default()
        };
        let pool = vec![sine(12.0, 50, 0.0)];
        let mut rng = output_rng(0, 0);
        assert!(matches!(
            ts_mixup(&pool, &spec, &mut rng),
            Err(Error::PoolTooSmall { needed: 2, actual: 1 })
        ));
        let short = vec![sine(12.0, 5, 0.0), sine(24.0, 5, 0.0)];
        assert!(matches!(
            ts_mixup(&short, &spec, &mut rng),
            Err(Error::PoolTooSmall { .. })
        ));
        let tiny = MixupSpec { len: 1, ..spec };
        assert!(matches!(
            ts_mixup(&pool, &tiny, &mut rng),
            Err(Error::SubsequenceTooShort { len: 1 })
        ));
    }

    #[test]
    fn corpus_is_deterministic() {
        let pool = vec![sine(12.0, 100, 0.0), sine(24.0, 100, 3.0), sine(24.0, 80, 7.0)];
        let spec = MixupSpec {
            k: 2,
            len: 32,
            count: 10,
            seed: 42,
            ..Default::default()
        };
        let a = generate_corpus(&pool, &spec).unwrap();
        let b = generate_corpus(&pool, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| generate_corpus(&pool, &spec).unwrap());
        assert_eq!(a, single);
    }

    #[test]
    fn zero_count_rejected() {
        let spec = MixupSpec {
            count: 0,
            ..Default::default()
        };
        assert!(matches!(generate_corpus(&[], &spec), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn outputs_stay_inside_source_envelope() {
        let pool = vec![sine(12.0, 200, 0.0), sine(24.0, 200, 5.0), sine(12.0, 150, 2.0)];
        for k in [2, 3] {
            let spec = MixupSpec {
                k,
                len: 48,
                count: 1,
                ..Default::default()
            };
            for i in 0..50 {
                let mix = ts_mixup_detailed(&pool, &spec, &mut output_rng(7, i)).unwrap();
                let total: f64 = mix.weights.iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(mix.weights.iter().all(|&w| w >= 0.0));
                for (j, &v) in mix.values.iter().enumerate() {
                    let lo = mix.sources.iter().map(|s| s[j]).fold(f64::INFINITY, f64::min);
                    let hi = mix.sources.iter().map(|s| s[j]).fold(f64::NEG_INFINITY, f64::max);
                    assert!(lo - 1e-12 <= v && v <= hi + 1e-12);
                }
            }
        }
    }
}
