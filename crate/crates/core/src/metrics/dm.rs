//! Diebold-Mariano test for equal predictive accuracy.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub const MIN_LEN: usize = 10;
pub const CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DmLoss {
    #[default]
    Squared,
    Absolute,
}

impl DmLoss {
    fn apply(self, e: f64) -> f64 {
        match self {
            DmLoss::Squared => e * e,
            DmLoss::Absolute => e.abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub statistic: f64,
    pub p_value: f64,
    /// `|statistic| > 1.96`.
    pub reject: bool,
    /// The long-run variance estimate was not positive; the statistic is reported as 0.
    pub degenerate: bool,
}

/// Test on a loss differential `d`, using a Bartlett-weighted long-run
/// variance with `h - 1` lags.
pub fn dm_from_differential(d: &[f64], h: usize) -> Result<DmResult> {
    if d.len() < MIN_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_LEN,
            actual: d.len(),
        });
    }
    if h == 0 {
        return Err(Error::InvalidConfig("horizon must be at least 1".into()));
    }
    let m = d.len() as f64;
    let mean = d.iter().sum::<f64>() / m;
    let autocov = |k: usize| -> f64 {
        d[k..].iter().zip(d).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / m
    };
    let mut v = autocov(0);
    for k in 1..h.min(d.len()) {
        v += 2.0 * (1.0 - k as f64 / h as f64) * autocov(k);
    }
    if !(v > 0.0) {
        return Ok(DmResult {
            statistic: 0.0,
            p_value: 1.0,
            reject: false,
            degenerate: true,
        });
    }
    let statistic = mean / (v / m).sqrt();
    let p_value = 2.0 * (1.0 - Normal::standard().cdf(statistic.abs()));
    Ok(DmResult {
        statistic,
        p_value,
        reject: statistic.abs() > CRITICAL,
        degenerate: false,
    })
}

/// Compare two error sequences; a positive statistic means the first model is worse.
pub fn dm_test(e1: &[f64], e2: &[f64], h: usize, loss: DmLoss) -> Result<DmResult> {
    if e1.len() != e2.len() {
        return Err(Error::MismatchedWindows);
    }
    let d: Vec<f64> = e1.iter().zip(e2).map(|(&a, &b)| loss.apply(a) - loss.apply(b)).collect();
    dm_from_differential(&d, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Straight-line restatement of the statistic for cross-checking.
    fn oracle(d: &[f64], h: usize) -> f64 {
        let n = d.len();
        let mut mean = 0.0;
        for x in d {
            mean += x;
        }
        mean /= n as f64;
        let mut v = 0.0;
        for k in 0..h {
            let mut g = 0.0;
            for t in k..n {
                g += (d[t] - mean) * (d[t - k] - mean);
            }
            g /= n as f64;
            let w = if k == 0 { 1.0 } else { 2.0 * (1.0 - k as f64 / h as f64) };
            v += w * g;
        }
        mean / (v / n as f64).sqrt()
    }

    #[test]
    fn identical_models() {
        let e = [0.3, -1.2, 0.5, 2.0, 0.1, -0.4, 0.9, 1.1, -0.7, 0.2, 0.05];
        let r = dm_test(&e, &e, 1, DmLoss::Squared).unwrap();
        assert_eq!((r.statistic, r.p_value, r.reject), (0.0, 1.0, false));
    }

    #[test]
    fn constant_differential_is_degenerate() {
        let r = dm_test(&[1.0; 100], &[0.0; 100], 1, DmLoss::Squared).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn ar1_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut d = Vec::with_capacity(300);
        let mut prev = 0.0;
        for _ in 0..300 {
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = 0.2 + 0.6 * prev + z;
            d.push(prev);
        }
        for h in [1, 2, 6, 24] {
            let got = dm_from_differential(&d, h).unwrap().statistic;
            assert!((got - oracle(&d, h)).abs() < 1e-10, "h={h}");
        }
    }

    #[test]
    fn antisymmetric() {
        let a: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 * 0.3 - 1.0).collect();
        let b: Vec<f64> = (0..40).map(|i| ((i * 13) % 7) as f64 * 0.2 - 0.5).collect();
        let ab = dm_test(&a, &b, 6, DmLoss::Squared).unwrap();
        let ba = dm_test(&b, &a, 6, DmLoss::Squared).unwrap();
        assert!((ab.statistic + ba.statistic).abs() < 1e-12);
        assert_eq!(ab.p_value, ba.p_value);
    }

    #[test]
    fn contract_cases() {
        assert!(dm_test(&[1.0; 5], &[0.0; 5], 1, DmLoss::Squared).is_err());
        assert!(matches!(
            dm_test(&[1.0; 12], &[0.0; 11], 1, DmLoss::Squared),
            Err(Error::MismatchedWindows)
        ));
    }
}
