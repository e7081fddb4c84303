use ndarray::Array2;

use super::network::softmax_rows;
use crate::tokenizer::PAD;

/// Summed cross-entropy over non-PAD targets and the number of such targets.
pub fn cross_entropy_sum(logits: &Array2<f64>, targets: &[u32]) -> (f64, usize) {
    let mut total = 0.0;
    let mut count = 0;
    for (row, &t) in logits.rows().into_iter().zip(targets) {
        if t == PAD {
            continue;
        }
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let log_z = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += log_z - row[t as usize];
        count += 1;
    }
    (total, count)
}

/// Mean cross-entropy per non-PAD target step; 0 when every target is PAD.
pub fn cross_entropy_loss(logits: &Array2<f64>, targets: &[u32]) -> f64 {
    let (total, count) = cross_entropy_sum(logits, targets);
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Gradient of `cross_entropy_sum / norm` with respect to the logits.
pub fn cross_entropy_grad(logits: &Array2<f64>, targets: &[u32], norm: f64) -> Array2<f64> {
    let mut d = softmax_rows(logits);
    for (mut row, &t) in d.rows_mut().into_iter().zip(targets) {
        if t == PAD {
            row.fill(0.0);
        } else {
            row[t as usize] -= 1.0;
            row /= norm;
        }
    }
    d
}
