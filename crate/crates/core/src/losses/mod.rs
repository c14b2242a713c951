//! Loss functions of the benchmark. Every loss returns its value together
//! with the gradient with respect to the predicted probability map.

mod cldice;
mod distance;
mod objective;
mod overlap;
mod schedule;
mod size;

pub use cldice::{cldice_loss, cldice_loss_with_skeleton, cldice_score};
pub use distance::{boundary_loss, hausdorff_loss, hausdorff_loss_with_distance};
pub use objective::{ClassTarget, LossConfig, Objective, Prior};
pub use overlap::dice_loss;
pub use schedule::{lambda_schedule, ScheduleState};
pub use size::{size_loss, SizeBounds};

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

/// Default additive smoothing for Dice and clDice ratios.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

/// A loss value and its gradient with respect to the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct LossEval {
    pub value: f64,
    pub grad: ScalarGrid,
}

impl LossEval {
    pub(crate) fn new(value: f64, grad: ScalarGrid) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::param(format!("loss value {value} is not finite")));
        }
        Ok(Self { value, grad })
    }
}

/// `(1 - lambda) * dice + lambda * prior`, applied to values and gradients.
/// At `lambda == 0` the Dice evaluation is returned untouched.
pub fn composite(dice: &LossEval, prior: &LossEval, lambda: f64) -> Result<LossEval> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::param(format!("lambda {lambda} is outside [0, 1)")));
    }
    dice.grad.domain().ensure_same(&prior.grad.domain())?;
    if lambda == 0.0 {
        return Ok(dice.clone());
    }
    let keep = 1.0 - lambda;
    let grad = dice
        .grad
        .values()
        .iter()
        .zip(prior.grad.values())
        .map(|(d, p)| keep * d + lambda * p)
        .collect();
    LossEval::new(
        keep * dice.value + lambda * prior.value,
        ScalarGrid::new(dice.grad.domain(), grad)?,
    )
}

pub(crate) fn ensure_domains(pred: &ScalarGrid, other: crate::grid::GridDomain) -> Result<()> {
    pred.domain().ensure_same(&other)
}
