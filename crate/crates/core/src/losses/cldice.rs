//! Centerline Dice: the F1 score between skeleton precision
//! `T_prec = |s_pred ∩ y| / |s_pred|` and skeleton sensitivity
//! `T_sens = |s_gt ∩ pred| / |s_gt|`, with soft intersections as pointwise
//! products. The loss is `1 - clDice`; its gradient comes from a tape that
//! records the whole soft-skeleton pipeline of the prediction.

use super::{ensure_domains, LossEval};
use crate::error::{Error, Result};
use crate::grid::{threshold, BinaryMask, ScalarGrid};
use crate::tape::Tape;
use crate::transforms::soft_skeleton;

fn check(pred: &ScalarGrid, gt: &BinaryMask, iterations: usize, eps: f64) -> Result<()> {
    ensure_domains(pred, gt.domain())?;
    if iterations == 0 {
        return Err(Error::param("skeleton iterations must be at least 1"));
    }
    if eps <= 0.0 {
        return Err(Error::param("clDice smoothing must be positive"));
    }
    pred.check_unit_range()
}

/// Loss for an empty ground truth: 0 when the thresholded prediction is also
/// empty, 1 otherwise, with a zero gradient.
fn degenerate(pred: &ScalarGrid) -> Result<LossEval> {
    let value = if threshold(pred, 0.5)?.is_empty() {
        0.0
    } else {
        1.0
    };
    LossEval::new(value, ScalarGrid::zeros(pred.domain()))
}

/// The raw clDice score in `[0, 1]` (higher is better).
pub fn cldice_score(
    pred: &ScalarGrid,
    gt: &BinaryMask,
    iterations: usize,
    eps: f64,
) -> Result<f64> {
    check(pred, gt, iterations, eps)?;
    if gt.is_empty() {
        return Ok(1.0 - degenerate(pred)?.value);
    }
    let gt_grid = gt.to_scalar();
    let pred_skel = soft_skeleton(pred, iterations)?;
    let gt_skel = soft_skeleton(&gt_grid, iterations)?;
    let dot = |a: &ScalarGrid, b: &ScalarGrid| {
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x * y)
            .sum::<f64>()
    };
    let prec = (dot(&pred_skel, &gt_grid) + eps) / (pred_skel.sum() + eps);
    let sens = (dot(&gt_skel, pred) + eps) / (gt_skel.sum() + eps);
    Ok(2.0 * prec * sens / (prec + sens))
}

/// `1 - clDice` and its gradient with respect to `pred`.
pub fn cldice_loss(
    pred: &ScalarGrid,
    gt: &BinaryMask,
    iterations: usize,
    eps: f64,
) -> Result<LossEval> {
    check(pred, gt, iterations, eps)?;
    let gt_skel = soft_skeleton(&gt.to_scalar(), iterations)?;
    cldice_loss_with_skeleton(pred, gt, &gt_skel, iterations, eps)
}

/// [`cldice_loss`] with the ground-truth skeleton computed once up front.
pub fn cldice_loss_with_skeleton(
    pred: &ScalarGrid,
    gt: &BinaryMask,
    gt_skeleton: &ScalarGrid,
    iterations: usize,
    eps: f64,
) -> Result<LossEval> {
    check(pred, gt, iterations, eps)?;
    ensure_domains(pred, gt_skeleton.domain())?;
    if gt.is_empty() {
        return degenerate(pred);
    }

    let mut tape = Tape::new(pred.domain());
    let p = tape.input(pred)?;
    let y = tape.constant(&gt.to_scalar())?;
    let s = tape.constant(gt_skeleton)?;

    let pred_skel = tape.soft_skeleton(p, iterations)?;
    let hit = tape.mul(pred_skel, y)?;
    let hit = tape.sum(hit);
    let prec_num = tape.affine(hit, 1.0, eps);
    let skel_mass = tape.sum(pred_skel);
    let prec_den = tape.affine(skel_mass, 1.0, eps);
    let prec = tape.div(prec_num, prec_den)?;

    let covered = tape.mul(s, p)?;
    let covered = tape.sum(covered);
    let sens_num = tape.affine(covered, 1.0, eps);
    let sens_den = tape.scalar_constant(gt_skeleton.sum() + eps);
    let sens = tape.div(sens_num, sens_den)?;

    let both = tape.mul(prec, sens)?;
    let both = tape.smul(both, 2.0);
    let either = tape.add(prec, sens)?;
    let score = tape.div(both, either)?;
    let loss = tape.affine(score, -1.0, 1.0);
    tape.set_output(loss)?;

    let grads = tape.backward()?;
    let value = tape.scalar(loss).expect("loss node is scalar");
    LossEval::new(value, grads.grid(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;

    fn line(d: GridDomain, row: usize) -> BinaryMask {
        BinaryMask::from_fn(d, |r, _| r == row)
    }

    #[test]
    fn perfect_thin_line() {
        let d = GridDomain::new(7, 7).unwrap();
        let gt = line(d, 3);
        let l = cldice_loss(&gt.to_scalar(), &gt, 3, 1e-6).unwrap();
        assert!(l.value <= 1e-4, "{}", l.value);
        assert!((cldice_score(&gt.to_scalar(), &gt, 3, 1e-6).unwrap() - 1.0).abs() <= 1e-4);
    }

    #[test]
    fn disjoint_thin_lines() {
        let d = GridDomain::new(7, 7).unwrap();
        let gt = line(d, 1);
        let pred = line(d, 5).to_scalar();
        assert!(cldice_loss(&pred, &gt, 3, 1e-6).unwrap().value >= 1.0 - 1e-3);
    }

    #[test]
    fn empty_truth_convention() {
        let d = GridDomain::new(5, 5).unwrap();
        let gt = BinaryMask::empty(d);
        let l = cldice_loss(&ScalarGrid::filled(d, 0.2), &gt, 3, 1e-6).unwrap();
        assert_eq!(l.value, 0.0);
        let l = cldice_loss(&line(d, 2).to_scalar(), &gt, 3, 1e-6).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(l.grad.values().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn score_and_loss_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let d = GridDomain::new(8, 8).unwrap();
        let gt = BinaryMask::from_fn(d, |r, c| r == 4 || c == 2);
        let pred = ScalarGrid::from_fn(d, |_, _| rng.random::<f64>()).unwrap();
        let l = cldice_loss(&pred, &gt, 4, 1e-6).unwrap();
        let s = cldice_score(&pred, &gt, 4, 1e-6).unwrap();
        assert!((l.value - (1.0 - s)).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_iterations() {
        let d = GridDomain::new(3, 3).unwrap();
        assert!(cldice_loss(&ScalarGrid::zeros(d), &BinaryMask::full(d), 0, 1e-6).is_err());
    }
}
