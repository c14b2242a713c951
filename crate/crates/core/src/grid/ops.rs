use super::{BinaryMask, GridDomain, ScalarGrid};
use crate::error::{Error, Result};

/// Binarizes a probability map: a pixel is foreground iff its value is
/// strictly greater than `t`, so a uniform 0.5 map yields the empty mask.
pub fn threshold(p: &ScalarGrid, t: f64) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::param(format!("threshold {t} is outside [0, 1]")));
    }
    p.check_unit_range()?;
    let values = p.values().iter().map(|&v| u8::from(v > t)).collect();
    BinaryMask::new(p.domain(), values)
}

/// Affine rescale to `[0, 1]`. Constant images map to all zeros.
pub fn normalize_intensity(img: &ScalarGrid) -> ScalarGrid {
    let lo = img.min();
    let hi = img.max();
    let range = hi - lo;
    if range <= 0.0 {
        return ScalarGrid::zeros(img.domain());
    }
    let values = img
        .values()
        .iter()
        .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
        .collect();
    ScalarGrid::from_vec_unchecked(img.domain(), values)
}

/// Grids that can be resampled by nearest neighbour.
pub trait Resample: Sized {
    fn resample_nearest(&self, target: GridDomain) -> Self;
}

#[inline]
fn source_index(i: usize, src: usize, target: usize) -> usize {
    // floor((i + 0.5) * src / target), in integer arithmetic
    ((2 * i + 1) * src) / (2 * target)
}

fn resample_vec<T: Copy>(values: &[T], from: GridDomain, to: GridDomain) -> Vec<T> {
    let cols: Vec<usize> = (0..to.width())
        .map(|c| source_index(c, from.width(), to.width()))
        .collect();
    let mut out = Vec::with_capacity(to.len());
    for r in 0..to.height() {
        let sr = source_index(r, from.height(), to.height());
        let row = &values[sr * from.width()..(sr + 1) * from.width()];
        out.extend(cols.iter().map(|&sc| row[sc]));
    }
    out
}

impl Resample for ScalarGrid {
    fn resample_nearest(&self, target: GridDomain) -> Self {
        ScalarGrid::from_vec_unchecked(target, resample_vec(self.values(), self.domain(), target))
    }
}

impl Resample for BinaryMask {
    fn resample_nearest(&self, target: GridDomain) -> Self {
        BinaryMask {
            domain: target,
            values: resample_vec(self.values(), self.domain(), target),
        }
    }
}

/// Nearest-neighbour resize; masks stay binary.
pub fn resize_nearest<G: Resample>(g: &G, target: GridDomain) -> G {
    g.resample_nearest(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_is_strict() {
        let p = ScalarGrid::from_rows(&[[0.4, 0.5, 0.6]]).unwrap();
        assert_eq!(threshold(&p, 0.5).unwrap().values(), &[0, 0, 1]);
        let z = ScalarGrid::zeros(GridDomain::new(3, 3).unwrap());
        assert!(threshold(&z, 0.5).unwrap().is_empty());
    }

    #[test]
    fn threshold_names_offending_pixel() {
        let p = ScalarGrid::from_rows(&[[0.4, 1.5]]).unwrap();
        assert!(matches!(
            threshold(&p, 0.5),
            Err(Error::OutOfUnitRange { index: 1, .. })
        ));
        assert!(threshold(&ScalarGrid::from_rows(&[[0.4]]).unwrap(), 1.5).is_err());
    }

    #[test]
    fn threshold_matches_per_pixel_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = GridDomain::new(8, 8).unwrap();
        let p = ScalarGrid::from_fn(d, |_, _| rng.random::<f64>()).unwrap();
        let m = threshold(&p, 0.5).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(m.get(r, c), p.get(r, c) > 0.5);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let g = ScalarGrid::from_rows(&[[2.0, 4.0, 6.0]]).unwrap();
        assert_eq!(normalize_intensity(&g).values(), &[0.0, 0.5, 1.0]);
        let c = ScalarGrid::from_rows(&[[5.0, 5.0, 5.0]]).unwrap();
        assert_eq!(normalize_intensity(&c).values(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn resize_2x2_to_4x4() {
        let m = BinaryMask::from_rows(&[[1, 0], [0, 1]]).unwrap();
        let up = resize_nearest(&m, GridDomain::new(4, 4).unwrap());
        let expected =
            BinaryMask::from_rows(&[[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, 1]])
                .unwrap();
        assert_eq!(up, expected);
        assert_eq!(resize_nearest(&m, m.domain()), m);
    }

    proptest! {
        #[test]
        fn threshold_monotone(vals in proptest::collection::vec(0.0f64..=1.0, 16), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let p = ScalarGrid::new(GridDomain::new(4, 4).unwrap(), vals).unwrap();
            let a = threshold(&p, lo).unwrap();
            let b = threshold(&p, hi).unwrap();
            for i in 0..16 {
                prop_assert!(!(b.is_set(i) && !a.is_set(i)));
            }
        }

        #[test]
        fn normalize_min_max_and_idempotent(vals in proptest::collection::vec(-100.0f64..100.0, 2..40)) {
            let n = vals.len();
            let g = ScalarGrid::new(GridDomain::new(1, n).unwrap(), vals).unwrap();
            let once = normalize_intensity(&g);
            if g.max() > g.min() {
                prop_assert_eq!(once.min(), 0.0);
                prop_assert_eq!(once.max(), 1.0);
                prop_assert_eq!(normalize_intensity(&once), once);
            }
        }

        #[test]
        fn resize_round_trip_on_integer_multiples(h in 1usize..6, w in 1usize..6, fy in 1usize..4, fx in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d = GridDomain::new(h, w).unwrap();
            let m = BinaryMask::from_fn(d, |_, _| rng.random_bool(0.5));
            let up = resize_nearest(&m, GridDomain::new(h * fy, w * fx).unwrap());
            prop_assert!(up.values().iter().all(|&v| v <= 1));
            prop_assert_eq!(resize_nearest(&up, d), m);
        }
    }
}
