use super::residual::residual_quantiles;
use crate::error::{Error, Result};
use crate::forecast::QuantileForecast;
use crate::series::ForecastTask;

/// Smoothed demand size `z` and inter-demand interval `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrostonState {
    pub z: f64,
    pub p: f64,
}

impl CrostonState {
    /// Bias-corrected demand rate `(1 - α/2) · z / p`.
    pub fn forecast(&self, alpha: f64) -> f64 {
        (1.0 - alpha / 2.0) * self.z / self.p
    }
}

/// Run the smoothing recursions, returning the final state (None if no demand
/// occurred) and the one-step in-sample forecast made before each observation.
pub fn croston_fit(history: &[f64], alpha: f64) -> Result<(Option<CrostonState>, Vec<f64>)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("croston alpha {alpha} outside (0, 1)")));
    }
    if let Some(i) = history.iter().position(|&v| v < 0.0) {
        return Err(Error::InvalidConfig(format!("negative demand at index {i}")));
    }
    let mut state: Option<CrostonState> = None;
    let mut last = 0;
    let mut fitted = Vec::with_capacity(history.len());
    for (t, &x) in history.iter().enumerate() {
        fitted.push(state.map_or(0.0, |s| s.forecast(alpha)));
        if x <= 0.0 {
            continue;
        }
        state = Some(match state {
            None => CrostonState {
                z: x,
                p: (t + 1) as f64,
            },
            Some(s) => CrostonState {
                z: s.z + alpha * (x - s.z),
                p: s.p + alpha * ((t - last) as f64 - s.p),
            },
        });
        last = t;
    }
    Ok((state, fitted))
}

pub fn croston_sba(history: &[f64], task: &ForecastTask, alpha: f64) -> Result<QuantileForecast> {
    let (state, fitted) = croston_fit(history, alpha)?;
    let Some(state) = state else {
        let rows = vec![vec![0.0; task.horizon]; task.quantiles.len()];
        return QuantileForecast::from_rows(task.quantiles.clone(), rows);
    };
    let point = vec![state.forecast(alpha); task.horizon];
    let residuals: Vec<f64> = history.iter().zip(&fitted).skip(1).map(|(x, f)| x - f).collect();
    residual_quantiles(&point, &residuals, &task.quantiles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_demand_fixed_point() {
        let task = ForecastTask::new(5, 10).unwrap();
        let qf = croston_sba(&[4.0; 30], &task, 0.1).unwrap();
        for &v in qf.row(0.5).unwrap() {
            assert!((v - 0.95 * 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn all_zero_forecasts_zero() {
        let task = ForecastTask::new(3, 10).unwrap();
        let qf = croston_sba(&[0.0; 12], &task, 0.1).unwrap();
        assert!(qf.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_trace() {
        // only demand: 6 at index 4 -> z = 6, p = 5
        let (s, _) = croston_fit(&[0.0, 0.0, 0.0, 0.0, 6.0], 0.1).unwrap();
        let s = s.unwrap();
        assert_eq!((s.z, s.p), (6.0, 5.0));
        assert!((s.forecast(0.1) - 0.95 * 6.0 / 5.0).abs() < 1e-15);

        // demands 2 at t=1, 5 at t=4: z = 2 + 0.1*(5-2) = 2.3, p = 2 + 0.1*(3-2) = 2.1
        let (s, fitted) = croston_fit(&[0.0, 2.0, 0.0, 0.0, 5.0], 0.1).unwrap();
        let s = s.unwrap();
        assert!((s.z - 2.3).abs() < 1e-12 && (s.p - 2.1).abs() < 1e-12);
        assert_eq!(fitted[..2], [0.0, 0.0]);
        assert!((fitted[2] - 0.95).abs() < 1e-12);
    }

    #[test]
    fn zero_placement_does_not_matter() {
        let (a, _) = croston_fit(&[3.0, 0.0, 0.0, 7.0, 0.0, 2.0, 0.0], 0.2).unwrap();
        let (b, _) = croston_fit(&[3.0, 0.0, 0.0, 7.0, 0.0, 2.0, 0.0, 0.0], 0.2).unwrap();
        assert_eq!(a, b);
        assert!(croston_fit(&[1.0, -1.0], 0.1).is_err());
    }
}
