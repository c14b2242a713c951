use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use segprior::losses::{
    boundary_loss, hausdorff_loss, ClassTarget, LossConfig, Objective, Prior, SizeBounds,
};
use segprior::refiner::{loss_and_logit_gradient, LogitField};
use segprior::transforms::{signed_distance, squared_edt};
use segprior::{BinaryMask, GridDomain, ScalarGrid};

fn dom(h: usize, w: usize) -> GridDomain {
    GridDomain::new(h, w).unwrap()
}

fn blob(d: GridDomain, cy: f64, cx: f64, r: f64) -> BinaryMask {
    BinaryMask::from_fn(d, |y, x| {
        (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2) <= r * r
    })
}

fn priors() -> Vec<LossConfig> {
    vec![
        LossConfig::dice(),
        LossConfig::with_prior(Prior::Boundary { normalize: true }),
        LossConfig::with_prior(Prior::Boundary { normalize: false }),
        LossConfig::with_prior(Prior::Size),
    ]
}

fn logit_fd(
    logits: &LogitField,
    objective: &Objective,
    lambda: f64,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (_, _, analytic) = loss_and_logit_gradient(logits, objective, lambda).unwrap();
    let base: Vec<f64> = (0..logits.channels())
        .flat_map(|c| logits.channel(c).to_vec())
        .collect();
    let eval = |v: Vec<f64>| {
        let l = LogitField::new(logits.domain(), logits.channels(), v).unwrap();
        loss_and_logit_gradient(&l, objective, lambda).unwrap().0
    };
    let numeric = (0..base.len())
        .map(|i| {
            let mut up = base.clone();
            let mut down = base.clone();
            up[i] += h;
            down[i] -= h;
            (eval(up) - eval(down)) / (2.0 * h)
        })
        .collect();
    (analytic, numeric)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

#[test]
fn composed_logistic_step_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let d = dom(4, 4);
    let gt = blob(d, 1.5, 1.5, 1.2);
    for cfg in priors() {
        for _ in 0..5 {
            let logits =
                LogitField::new(d, 1, (0..16).map(|_| rng.random_range(-2.0..2.0)).collect())
                    .unwrap();
            let bounds = SizeBounds::new(2.0, 4.0).unwrap();
            let obj =
                Objective::new(cfg, vec![ClassTarget::new(gt.clone(), Some(bounds))]).unwrap();
            let (a, n) = logit_fd(&logits, &obj, 0.4, 1e-5);
            assert!(max_rel(&a, &n) < 1e-4, "{cfg}: {}", max_rel(&a, &n));
        }
    }
}

#[test]
fn composed_softmax_step_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let d = dom(4, 4);
    let inner = blob(d, 1.0, 1.0, 1.0);
    let outer = BinaryMask::from_fn(d, |r, c| r >= 2 && c >= 1);
    for cfg in priors() {
        let logits =
            LogitField::new(d, 3, (0..48).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let targets = vec![
            ClassTarget::new(inner.clone(), Some(SizeBounds::new(1.0, 2.0).unwrap())),
            ClassTarget::new(outer.clone(), Some(SizeBounds::new(7.0, 8.0).unwrap())),
        ];
        let obj = Objective::new(cfg, targets).unwrap();
        let (a, n) = logit_fd(&logits, &obj, 0.3, 1e-5);
        assert!(max_rel(&a, &n) < 1e-4, "{cfg}: {}", max_rel(&a, &n));
    }
}

#[test]
fn cldice_composite_gradient_through_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let d = dom(6, 6);
    let gt = BinaryMask::from_fn(d, |r, c| r == 2 || c == 3);
    let cfg = LossConfig::with_prior(Prior::ClDice { iterations: 2 });
    let obj = Objective::new(cfg, vec![ClassTarget::new(gt, None)]).unwrap();
    let logits =
        LogitField::new(d, 1, (0..36).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
    let (a, n) = logit_fd(&logits, &obj, 0.5, 1e-5);
    // pooling ties are measure-zero for continuous random logits
    assert!(max_rel(&a, &n) < 1e-3, "{}", max_rel(&a, &n));
}

#[test]
fn one_small_step_descends_by_the_squared_gradient_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let d = dom(8, 8);
    let gt = blob(d, 3.5, 4.0, 2.5);
    let eta = 1e-6;
    for cfg in priors() {
        let logits =
            LogitField::new(d, 1, (0..64).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap();
        let obj = Objective::new(
            cfg,
            vec![ClassTarget::new(
                gt.clone(),
                Some(SizeBounds::new(10.0, 14.0).unwrap()),
            )],
        )
        .unwrap();
        let (before, _, g) = loss_and_logit_gradient(&logits, &obj, 0.5).unwrap();
        let stepped: Vec<f64> = logits
            .channel(0)
            .iter()
            .zip(&g)
            .map(|(z, gi)| z - eta * gi)
            .collect();
        let after = loss_and_logit_gradient(&LogitField::new(d, 1, stepped).unwrap(), &obj, 0.5)
            .unwrap()
            .0;
        let predicted = eta * g.iter().map(|x| x * x).sum::<f64>();
        let actual = before - after;
        assert!(
            (actual - predicted).abs() <= 0.05 * predicted,
            "{cfg}: decrease {actual:e} vs {predicted:e}"
        );
    }
}

#[test]
fn boundary_loss_is_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let d = dom(7, 9);
    let phi = signed_distance(&blob(d, 3.0, 4.0, 2.0));
    let a = ScalarGrid::from_fn(d, |_, _| rng.random_range(0.0..1.0)).unwrap();
    let b = ScalarGrid::from_fn(d, |_, _| rng.random_range(0.0..1.0)).unwrap();
    let sum = ScalarGrid::new(
        d,
        a.values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x + y)
            .collect(),
    )
    .unwrap();
    let la = boundary_loss(&a, &phi, false).unwrap().value;
    let lb = boundary_loss(&b, &phi, false).unwrap().value;
    let ls = boundary_loss(&sum, &phi, false).unwrap().value;
    assert!((ls - la - lb).abs() < 1e-12);
    let scaled = a.map(|v| 0.3 * v).unwrap();
    assert!((boundary_loss(&scaled, &phi, false).unwrap().value - 0.3 * la).abs() < 1e-12);
}

#[test]
fn boundary_loss_prefers_the_true_pixel() {
    let phi = signed_distance(&BinaryMask::from_rows(&[[0, 1, 0]]).unwrap());
    let truth = ScalarGrid::from_rows(&[[0.0, 1.0, 0.0]]).unwrap();
    assert_eq!(boundary_loss(&truth, &phi, false).unwrap().value, -1.0);
    for i in [0, 2] {
        let mut v = vec![0.0; 3];
        v[i] = 1.0;
        let p = ScalarGrid::new(dom(1, 3), v).unwrap();
        assert!(boundary_loss(&p, &phi, false).unwrap().value >= 1.0);
    }
}

fn brute_distance_to(m: &BinaryMask, target_set: bool) -> Vec<f64> {
    let d = m.domain();
    (0..d.len())
        .map(|i| {
            let (r, c) = d.coords(i);
            if m.is_set(i) == target_set {
                return 0.0;
            }
            (0..d.len())
                .filter(|&j| m.is_set(j) == target_set)
                .map(|j| {
                    let (r2, c2) = d.coords(j);
                    ((r as f64 - r2 as f64).powi(2) + (c as f64 - c2 as f64).powi(2)).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Distance to the opposite class at every pixel.
fn brute_opposite(m: &BinaryMask) -> Vec<f64> {
    let to_fg = brute_distance_to(m, true);
    let to_bg = brute_distance_to(m, false);
    (0..to_fg.len())
        .map(|i| if m.is_set(i) { to_bg[i] } else { to_fg[i] })
        .collect()
}

#[test]
fn hausdorff_loss_matches_oracle_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let d = dom(8, 8);
    for _ in 0..20 {
        let gt = BinaryMask::from_fn(d, |_, _| rng.random_bool(0.4));
        let pred = ScalarGrid::from_fn(d, |_, _| rng.random_range(0.0..1.0)).unwrap();
        let hard = BinaryMask::from_fn(d, |r, c| pred.get(r, c) > 0.5);
        if gt.is_uniform() || hard.is_uniform() {
            continue;
        }
        let dg = brute_opposite(&gt);
        let dp = brute_opposite(&hard);
        let want = (0..d.len())
            .map(|i| {
                let e = f64::from(gt.values()[i]) - pred.values()[i];
                e * e * (dg[i] * dg[i] + dp[i] * dp[i])
            })
            .sum::<f64>()
            / d.len() as f64;
        let got = hausdorff_loss(&pred, &gt).unwrap().value;
        assert!((got - want).abs() < 1e-9 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn squared_edt_of_full_row_is_row_distance() {
    let d = dom(5, 3);
    let m = BinaryMask::from_fn(d, |r, _| r == 0);
    let sq = squared_edt(&m).unwrap();
    for r in 0..5 {
        for c in 0..3 {
            assert_eq!(sq[d.index(r, c)], (r * r) as u64);
        }
    }
}
