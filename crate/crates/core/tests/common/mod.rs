#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use tokcast::series::save_csv;
use tokcast::TimeSeries;

pub fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2021, 3, 1, 0, 0, 0).unwrap()
}

/// Exactly 24-periodic: three harmonics around a level of 10.
pub fn harmonic(id: &str, n: usize, coeffs: [f64; 6], phase: f64) -> TimeSeries {
    let v = (0..n)
        .map(|t| {
            let a = 2.0 * PI * (t as f64 + phase) / 24.0;
            (0..3)
                .map(|k| {
                    let w = (k + 1) as f64 * a;
                    coeffs[2 * k] * w.sin() + coeffs[2 * k + 1] * w.cos()
                })
                .sum::<f64>()
                + 10.0
        })
        .collect();
    TimeSeries::hourly(id, epoch(), v).unwrap()
}

pub fn random_harmonic(rng: &mut ChaCha8Rng, id: String, n: usize) -> TimeSeries {
    let coeffs = std::array::from_fn(|k| rng.random_range(-3.0..3.0) / (1 + k / 2) as f64);
    harmonic(&id, n, coeffs, rng.random_range(0.0..24.0))
}

/// Daily sinusoids with a second harmonic, a small trend and noise.
pub fn synthetic_pool(n: usize, len: usize, seed: u64) -> Vec<TimeSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let level = rng.random_range(20.0..100.0);
            let amp = level * rng.random_range(0.05..0.3);
            let amp2 = level * rng.random_range(0.0..0.1);
            let slope = level * rng.random_range(-0.002..0.002);
            let phase = rng.random_range(0.0..24.0);
            let noise = Normal::new(0.0, level * 0.01).unwrap();
            let v = (0..len)
                .map(|t| {
                    let a = 2.0 * PI * (t as f64 + phase) / 24.0;
                    level + slope * t as f64 + amp * a.sin() + amp2 * (2.0 * a).cos() + noise.sample(&mut rng)
                })
                .collect();
            TimeSeries::hourly(format!("syn{i}"), epoch(), v).unwrap()
        })
        .collect()
}

/// A seasonal load-like series none of the pools contain.
pub fn seasonal_load(id: &str, len: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.8).unwrap();
    let v = (0..len)
        .map(|t| {
            let a = 2.0 * PI * (t as f64 + 5.3) / 24.0;
            60.0 + 0.01 * t as f64 + 9.0 * a.sin() + 3.0 * (2.0 * a + 0.7).sin() + noise.sample(&mut rng)
        })
        .collect();
    TimeSeries::hourly(id, epoch(), v).unwrap()
}

pub fn write_series(path: &Path, series: &[TimeSeries]) {
    save_csv(path, series).unwrap();
}
