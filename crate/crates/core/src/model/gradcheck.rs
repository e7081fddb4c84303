//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ModelConfig;
use super::data::TokenWindow;
use super::network::forward_with_cache;
use super::params::ModelParams;
use super::train::{batch_gradient, mean_loss};
use crate::error::Result;

/// Floor on the denominator of the relative error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates skipped because `±ε` crossed a ReLU kink.
    pub skipped: usize,
    pub worst: Option<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn relu_patterns(params: &ModelParams, cfg: &ModelConfig, batch: &[TokenWindow]) -> Result<Vec<Vec<bool>>> {
    batch
        .iter()
        .map(|w| forward_with_cache(params, cfg, &w.encoder, &w.decoder).map(|(_, c)| c.relu_pattern()))
        .collect()
}

fn crosses_kink(params: &ModelParams, cfg: &ModelConfig, batch: &[TokenWindow], base: Option<&[Vec<bool>]>) -> Result<bool> {
    match base {
        Some(b) => Ok(relu_patterns(params, cfg, batch)? != b),
        None => Ok(false),
    }
}

/// `(loss(θ + ε) - loss(θ - ε)) / 2ε` for one coordinate, plus whether the
/// perturbation changed any ReLU activation.
fn central_difference(
    params: &mut ModelParams,
    cfg: &ModelConfig,
    batch: &[TokenWindow],
    tensor: usize,
    index: usize,
    eps: f64,
    base: Option<&[Vec<bool>]>,
) -> Result<(f64, bool)> {
    let orig = params.get(tensor, index);
    params.set(tensor, index, orig + eps);
    let plus = mean_loss(params, cfg, batch)?;
    let mut kink = crosses_kink(params, cfg, batch, base)?;
    params.set(tensor, index, orig - eps);
    let minus = mean_loss(params, cfg, batch)?;
    kink |= crosses_kink(params, cfg, batch, base)?;
    params.set(tensor, index, orig);
    Ok(((plus - minus) / (2.0 * eps), kink))
}

/// Check `coords` coordinates, choosing a tensor uniformly and then an entry
/// uniformly within it.
pub fn grad_check(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[TokenWindow],
    eps: f64,
    coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let refs: Vec<&TokenWindow> = batch.iter().collect();
    let (_, grad) = batch_gradient(params, cfg, &refs)?;
    let names: Vec<(String, usize)> = params.tensors().into_iter().map(|(n, t)| (n, t.len())).collect();
    let base = relu_patterns(params, cfg, batch)?;
    let mut work = params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        worst: None,
    };
    while report.checked < coords {
        let tensor = rng.random_range(0..names.len());
        let index = rng.random_range(0..names[tensor].1);
        let (numeric, kink) = central_difference(&mut work, cfg, batch, tensor, index, eps, Some(&base))?;
        if kink {
            report.skipped += 1;
            continue;
        }
        let err = relative_error(grad.get(tensor, index), numeric);
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some((names[tensor].0.clone(), index));
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Absolute finite-difference error at `eps` and `2 * eps` for one coordinate.
/// For a second-order scheme the second is about four times the first.
pub fn truncation_errors(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[TokenWindow],
    tensor: usize,
    index: usize,
    eps: f64,
) -> Result<(f64, f64)> {
    let refs: Vec<&TokenWindow> = batch.iter().collect();
    let (_, grad) = batch_gradient(params, cfg, &refs)?;
    let analytic = grad.get(tensor, index);
    let mut work = params.clone();
    let (n1, _) = central_difference(&mut work, cfg, batch, tensor, index, eps, None)?;
    let (n2, _) = central_difference(&mut work, cfg, batch, tensor, index, 2.0 * eps, None)?;
    Ok(((n1 - analytic).abs(), (n2 - analytic).abs()))
}
