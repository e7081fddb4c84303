use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::series::ForecastTask;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NptsParams {
    /// Exponential kernel rate; `f64::INFINITY` always picks the most recent observation.
    pub lambda: f64,
    /// Restrict to observations in the same phase of a period `m`.
    pub seasonal: bool,
    pub m: usize,
    pub samples: usize,
}

/// Candidate history indices for future index `target`, most recent first,
/// with kernel weights `exp(-λ · (rank - 1))`.
pub fn kernel_weights(n: usize, target: usize, p: &NptsParams) -> Vec<(usize, f64)> {
    let eligible: Vec<usize> = (0..n)
        .rev()
        .filter(|&i| !p.seasonal || i % p.m == target % p.m)
        .collect();
    eligible
        .into_iter()
        .enumerate()
        .map(|(rank0, i)| {
            let w = if rank0 == 0 {
                1.0
            } else {
                (-p.lambda * rank0 as f64).exp()
            };
            (i, w)
        })
        .collect()
}

struct Sampler {
    indices: Vec<usize>,
    dist: Option<WeightedIndex<f64>>,
}

impl Sampler {
    fn new(weights: Vec<(usize, f64)>) -> Self {
        let (indices, w): (Vec<usize>, Vec<f64>) = weights.into_iter().unzip();
        // With every weight but the first underflowing, sampling is deterministic.
        let dist = if w[1..].iter().all(|&x| x == 0.0) {
            None
        } else {
            Some(WeightedIndex::new(&w).expect("first weight is 1"))
        };
        Self { indices, dist }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.dist {
            Some(d) => self.indices[d.sample(rng)],
            None => self.indices[0],
        }
    }
}

/// Non-parametric forecast: each future value is drawn from past
/// observations, weighted by recency.
pub fn npts<R: Rng + ?Sized>(history: &[f64], task: &ForecastTask, p: &NptsParams, rng: &mut R) -> Result<QuantileForecast> {
    if !(p.lambda > 0.0) {
        return Err(Error::InvalidConfig("npts kernel rate must be positive".into()));
    }
    if p.samples == 0 || p.m == 0 {
        return Err(Error::InvalidConfig("npts needs at least one sample and m >= 1".into()));
    }
    let needed = if p.seasonal { p.m } else { 1 };
    if history.len() < needed {
        return Err(Error::SeriesTooShort {
            needed,
            actual: history.len(),
        });
    }
    let n = history.len();
    let phases = if p.seasonal { p.m.min(task.horizon) } else { 1 };
    let samplers: Vec<Sampler> = (0..phases).map(|j| Sampler::new(kernel_weights(n, n + j, p))).collect();
    let paths: Vec<Vec<f64>> = (0..p.samples)
        .map(|_| {
            (0..task.horizon)
                .map(|j| history[samplers[j % phases].draw(rng)])
                .collect()
        })
        .collect();
    QuantileForecast::from_samples(&task.quantiles, paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(lambda: f64, seasonal: bool, samples: usize) -> NptsParams {
        NptsParams {
            lambda,
            seasonal,
            m: 24,
            samples,
        }
    }

    #[test]
    fn constant_history_gives_constant_quantiles() {
        let task = ForecastTask::new(4, 48).unwrap();
        let qf = npts(&[7.5; 48], &task, &params(1.0, true, 50), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(qf.values.iter().flatten().all(|&v| v == 7.5));
    }

    #[test]
    fn infinite_rate_picks_latest() {
        let task = ForecastTask::new(3, 5).unwrap();
        let history = [1.0, 2.0, 3.0, 4.0, 5.0];
        let qf = npts(&history, &task, &params(f64::INFINITY, false, 30), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(qf.sample_paths.iter().flatten().all(|&v| v == 5.0));
    }

    #[test]
    fn two_point_frequencies_match_kernel() {
        let task = ForecastTask::new(1, 2).unwrap();
        let (a, b) = (1.0, 2.0);
        let draws = 100_000;
        let qf = npts(&[b, a], &task, &params(1.0, false, draws), &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let freq = qf.sample_paths.iter().filter(|p| p[0] == a).count() as f64 / draws as f64;
        let expect = (-1f64).exp() / ((-1f64).exp() + (-2f64).exp());
        assert!((freq - expect).abs() < 0.01, "{freq} vs {expect}");
    }

    #[test]
    fn samples_come_from_history() {
        let history: Vec<f64> = (0..72).map(|t| ((t * 7) % 13) as f64).collect();
        let task = ForecastTask::new(30, 72).unwrap();
        let qf = npts(&history, &task, &params(0.3, true, 40), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(qf.sample_paths.iter().flatten().all(|v| history.contains(v)));
        for (j, step) in (0..30).map(|j| (j, qf.sample_paths.iter().map(move |p| p[j]))) {
            let allowed: Vec<f64> = (0..72).filter(|i| i % 24 == (72 + j) % 24).map(|i| history[i]).collect();
            assert!(step.into_iter().all(|v| allowed.contains(&v)));
        }
    }
}
