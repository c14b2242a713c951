use super::{ensure_domains, LossEval};
use crate::error::Result;
use crate::grid::{threshold, BinaryMask, ScalarGrid};
use crate::transforms::{opposite_class_distance, SignedDistanceMap};

/// Boundary loss `sum_p phi(p) * pred(p)`, optionally divided by |Ω|.
/// Linear in the prediction, so the gradient is `phi` itself.
pub fn boundary_loss(
    pred: &ScalarGrid,
    phi: &SignedDistanceMap,
    normalize: bool,
) -> Result<LossEval> {
    ensure_domains(pred, phi.domain())?;
    let scale = if normalize {
        1.0 / pred.domain().len() as f64
    } else {
        1.0
    };
    let value: f64 = pred
        .values()
        .iter()
        .zip(phi.values())
        .map(|(p, f)| p * f)
        .sum::<f64>()
        * scale;
    let grad = phi.values().iter().map(|f| f * scale).collect();
    LossEval::new(value, ScalarGrid::new(pred.domain(), grad)?)
}

/// Hausdorff loss
/// `(1/|Ω|) sum_p (y_p - pred_p)^2 (D_y(p)^2 + D_pred(p)^2)`.
///
/// `D_y` and `D_pred` are opposite-class distance maps of the ground truth
/// and of the prediction thresholded at 0.5. Both are recomputed per call
/// and held constant in the gradient.
pub fn hausdorff_loss(pred: &ScalarGrid, gt: &BinaryMask) -> Result<LossEval> {
    ensure_domains(pred, gt.domain())?;
    hausdorff_loss_with_distance(pred, gt, &opposite_class_distance(gt))
}

/// [`hausdorff_loss`] with a precomputed ground-truth distance map.
pub fn hausdorff_loss_with_distance(
    pred: &ScalarGrid,
    gt: &BinaryMask,
    gt_distance: &ScalarGrid,
) -> Result<LossEval> {
    ensure_domains(pred, gt.domain())?;
    ensure_domains(pred, gt_distance.domain())?;
    let pred_distance = opposite_class_distance(&threshold(pred, 0.5)?);
    let n = pred.domain().len() as f64;
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(pred.values().len());
    for (((&p, &y), &dy), &dp) in pred
        .values()
        .iter()
        .zip(gt.values())
        .zip(gt_distance.values())
        .zip(pred_distance.values())
    {
        let weight = dy * dy + dp * dp;
        let diff = p - f64::from(y);
        value += diff * diff * weight;
        grad.push(2.0 * diff * weight / n);
    }
    LossEval::new(value / n, ScalarGrid::new(pred.domain(), grad)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use crate::transforms::signed_distance;

    #[test]
    fn boundary_single_row() {
        let pred = ScalarGrid::from_rows(&[[0.5, 0.5, 0.5]]).unwrap();
        let phi = SignedDistanceMap::from_grid(ScalarGrid::from_rows(&[[1.0, -1.0, 1.0]]).unwrap());
        let l = boundary_loss(&pred, &phi, false).unwrap();
        assert_eq!(l.value, 0.5);
        assert_eq!(l.grad.values(), phi.values());
        let normalized = boundary_loss(&pred, &phi, true).unwrap();
        assert!((normalized.value - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_zero_prediction() {
        let gt = BinaryMask::from_rows(&[[0, 1, 1, 0], [0, 0, 1, 0]]).unwrap();
        let pred = ScalarGrid::zeros(gt.domain());
        assert_eq!(
            boundary_loss(&pred, &signed_distance(&gt), false)
                .unwrap()
                .value,
            0.0
        );
    }

    #[test]
    fn boundary_prefers_true_region() {
        let gt = BinaryMask::from_rows(&[[0, 1, 0]]).unwrap();
        let phi = signed_distance(&gt);
        let truth = boundary_loss(&gt.to_scalar(), &phi, false).unwrap().value;
        assert_eq!(truth, -1.0);
        for i in [0, 2] {
            let mut v = vec![0.0; 3];
            v[i] = 1.0;
            let p = ScalarGrid::new(gt.domain(), v).unwrap();
            assert!(boundary_loss(&p, &phi, false).unwrap().value >= 1.0);
        }
    }

    #[test]
    fn hausdorff_swapped_pair() {
        let gt = BinaryMask::from_rows(&[[1, 0]]).unwrap();
        let pred = ScalarGrid::from_rows(&[[0.0, 1.0]]).unwrap();
        let l = hausdorff_loss(&pred, &gt).unwrap();
        assert_eq!(l.value, 2.0);
    }

    #[test]
    fn hausdorff_perfect_prediction() {
        let gt = BinaryMask::from_rows(&[[1, 0, 0], [1, 1, 0]]).unwrap();
        let l = hausdorff_loss(&gt.to_scalar(), &gt).unwrap();
        assert_eq!(l.value, 0.0);
        assert!(l.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn hausdorff_empty_truth_uses_zero_distances() {
        let gt = BinaryMask::empty(GridDomain::new(2, 2).unwrap());
        // empty prediction too: both distance maps vanish
        let pred = ScalarGrid::filled(gt.domain(), 0.3);
        assert_eq!(hausdorff_loss(&pred, &gt).unwrap().value, 0.0);
    }
}
