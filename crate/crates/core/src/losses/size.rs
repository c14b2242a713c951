use super::LossEval;
use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

/// Permissible size band `[lower, upper]` in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SizeBounds {
    lower: f64,
    upper: f64,
}

impl SizeBounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite()) || lower < 0.0 || lower > upper {
            return Err(Error::param(format!(
                "size bounds need 0 <= lower <= upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// `[(1 - margin) * size, (1 + margin) * size]`.
    pub fn around(size: f64, margin: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&margin) {
            return Err(Error::param(format!(
                "size margin {margin} is outside [0, 1]"
            )));
        }
        Self::new(size * (1.0 - margin), size * (1.0 + margin))
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, size: f64) -> bool {
        (self.lower..=self.upper).contains(&size)
    }
}

/// Quadratic penalty on the soft area `A = sum(pred)` outside the band:
/// `(A - lower)^2` when `A <= lower`, `(A - upper)^2` when `A >= upper`,
/// zero in between. The gradient is uniform over the grid.
pub fn size_loss(pred: &ScalarGrid, bounds: SizeBounds) -> Result<LossEval> {
    let area = pred.sum();
    let excess = if area <= bounds.lower {
        area - bounds.lower
    } else if area >= bounds.upper {
        area - bounds.upper
    } else {
        0.0
    };
    LossEval::new(
        excess * excess,
        ScalarGrid::filled(pred.domain(), 2.0 * excess),
    )
}
