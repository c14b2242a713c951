use super::{ensure_domains, LossEval};
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, ScalarGrid};

/// Soft Dice loss `1 - (2 sum(y*p) + eps) / (sum(y) + sum(p) + eps)` with its
/// quotient-rule gradient.
pub fn dice_loss(pred: &ScalarGrid, gt: &BinaryMask, eps: f64) -> Result<LossEval> {
    ensure_domains(pred, gt.domain())?;
    if eps <= 0.0 {
        return Err(Error::param("Dice smoothing must be positive"));
    }
    let mut inter = 0.0;
    let mut pred_sum = 0.0;
    for (&p, &y) in pred.values().iter().zip(gt.values()) {
        pred_sum += p;
        if y != 0 {
            inter += p;
        }
    }
    let total = gt.count() as f64 + pred_sum + eps;
    let num = 2.0 * inter + eps;
    let value = 1.0 - num / total;
    let total_sq = total * total;
    let grad = gt
        .values()
        .iter()
        .map(|&y| -(2.0 * f64::from(y) * total - num) / total_sq)
        .collect();
    LossEval::new(value, ScalarGrid::new(pred.domain(), grad)?)
}
