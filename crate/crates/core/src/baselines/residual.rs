use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;

/// Standard normal quantile, exactly zero at the median.
pub fn z_score(alpha: f64) -> f64 {
    if (alpha - 0.5).abs() < 1e-12 {
        return 0.0;
    }
    Normal::standard().inverse_cdf(alpha)
}

/// Sample standard deviation (`n - 1` denominator).
pub fn sample_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientResiduals(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (n - 1.0)).sqrt())
}

/// `point_t + z_α · σ̂` for every level, with σ̂ from the residuals.
pub fn residual_quantiles(point: &[f64], residuals: &[f64], levels: &[f64]) -> Result<QuantileForecast> {
    let sigma = sample_std(residuals)?;
    let values = levels
        .iter()
        .map(|&a| {
            let z = z_score(a);
            point.iter().map(|p| p + z * sigma).collect()
        })
        .collect();
    QuantileForecast::from_rows(levels.to_vec(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_the_point() {
        let qf = residual_quantiles(&[3.0, 4.0], &[1.0, -1.0, 2.0], &[0.1, 0.5, 0.9]).unwrap();
        assert_eq!(qf.row(0.5).unwrap(), &[3.0, 4.0]);
    }

    #[test]
    fn zero_spread_collapses() {
        let qf = residual_quantiles(&[2.0], &[0.5, 0.5, 0.5], &[0.1, 0.5, 0.9]).unwrap();
        assert!(qf.values.iter().all(|r| r == &[2.0]));
    }

    #[test]
    fn ninth_decile_offset() {
        // residuals with unit sample std: mean 0, squares sum to n - 1
        let qf = residual_quantiles(&[10.0], &[-1.0, 0.0, 1.0], &[0.9]).unwrap();
        assert!((qf.values[0][0] - 11.281_551_565_544_6).abs() < 1e-9);
    }

    #[test]
    fn needs_two_residuals() {
        assert!(matches!(
            residual_quantiles(&[1.0], &[0.3], &[0.5]),
            Err(Error::InsufficientResiduals(1))
        ));
    }
}
