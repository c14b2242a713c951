//! Soft skeletonization by iterated soft morphology.
//!
//! ```text
//! skel  = relu(img - open(img))
//! repeat k times:
//!     img   = erode(img)
//!     delta = relu(img - open(img))
//!     skel  = skel + relu(delta - skel * delta)
//! ```
//!
//! with `erode` the 3x3 min filter, `dilate` the 3x3 max filter and
//! `open = dilate(erode(.))`. The update `skel + delta * (1 - skel)` keeps the
//! result in `[0, 1]`. The recurrence is written once against
//! [`SoftMorphology`] so the same code runs on plain grids and on a tape.

use super::morphology::{max_pool3_values, min_pool3_values};
use crate::error::{Error, Result};
use crate::grid::{GridDomain, ScalarGrid};

pub const DEFAULT_SKELETON_ITERATIONS: usize = 10;

/// The primitives the skeleton recurrence needs.
pub(crate) trait SoftMorphology {
    type Field;

    fn erode(&mut self, x: &Self::Field) -> Self::Field;
    fn dilate(&mut self, x: &Self::Field) -> Self::Field;
    fn add(&mut self, a: &Self::Field, b: &Self::Field) -> Self::Field;
    fn sub(&mut self, a: &Self::Field, b: &Self::Field) -> Self::Field;
    fn mul(&mut self, a: &Self::Field, b: &Self::Field) -> Self::Field;
    fn relu(&mut self, x: &Self::Field) -> Self::Field;
}

pub(crate) fn soft_skeleton_with<M: SoftMorphology>(
    m: &mut M,
    img: M::Field,
    iterations: usize,
) -> M::Field {
    let opened = {
        let e = m.erode(&img);
        m.dilate(&e)
    };
    let residual = m.sub(&img, &opened);
    let mut skel = m.relu(&residual);
    let mut img = img;
    for _ in 0..iterations {
        img = m.erode(&img);
        let opened = {
            let e = m.erode(&img);
            m.dilate(&e)
        };
        let residual = m.sub(&img, &opened);
        let delta = m.relu(&residual);
        let overlap = m.mul(&skel, &delta);
        let fresh = m.sub(&delta, &overlap);
        let fresh = m.relu(&fresh);
        skel = m.add(&skel, &fresh);
    }
    skel
}

/// Direct evaluation on plain value buffers.
pub(crate) struct Direct(pub GridDomain);

impl SoftMorphology for Direct {
    type Field = Vec<f64>;

    fn erode(&mut self, x: &Vec<f64>) -> Vec<f64> {
        min_pool3_values(x, self.0)
    }

    fn dilate(&mut self, x: &Vec<f64>) -> Vec<f64> {
        max_pool3_values(x, self.0)
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    fn sub(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x * y).collect()
    }

    fn relu(&mut self, x: &Vec<f64>) -> Vec<f64> {
        x.iter().map(|&v| v.max(0.0)).collect()
    }
}

/// Soft skeleton of a probability map after `iterations` erosion steps.
pub fn soft_skeleton(p: &ScalarGrid, iterations: usize) -> Result<ScalarGrid> {
    if iterations == 0 {
        return Err(Error::param("skeleton iterations must be at least 1"));
    }
    p.check_unit_range()?;
    let domain = p.domain();
    let skel = soft_skeleton_with(&mut Direct(domain), p.values().to_vec(), iterations);
    Ok(ScalarGrid::from_vec_unchecked(domain, skel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BinaryMask;
    use proptest::prelude::*;

    fn mask_grid(rows: &[[u8; 5]]) -> ScalarGrid {
        BinaryMask::from_rows(rows).unwrap().to_scalar()
    }

    #[test]
    fn rejects_zero_iterations_and_bad_range() {
        let g = ScalarGrid::zeros(GridDomain::new(2, 2).unwrap());
        assert!(soft_skeleton(&g, 0).is_err());
        let bad = ScalarGrid::from_rows(&[[1.5]]).unwrap();
        assert!(soft_skeleton(&bad, 1).is_err());
    }

    #[test]
    fn single_pixel_is_its_own_skeleton() {
        let d = GridDomain::new(5, 5).unwrap();
        let mut m = BinaryMask::empty(d);
        m.set(2, 2, true);
        let g = m.to_scalar();
        assert_eq!(soft_skeleton(&g, 3).unwrap(), g);
    }

    #[test]
    fn thin_line_is_its_own_skeleton() {
        // erosion removes the line at once; the opening residual keeps all of it
        let horizontal = mask_grid(&[[0; 5], [0; 5], [1; 5], [0; 5], [0; 5]]);
        assert_eq!(soft_skeleton(&horizontal, 3).unwrap(), horizontal);
        let diagonal = mask_grid(&[
            [1, 0, 0, 0, 0],
            [0, 1, 0, 0, 0],
            [0, 0, 1, 0, 0],
            [0, 0, 0, 1, 0],
            [0, 0, 0, 0, 1],
        ]);
        assert_eq!(soft_skeleton(&diagonal, 3).unwrap(), diagonal);
    }

    #[test]
    fn solid_square_shrinks_to_center() {
        // hand evaluation: erode(5x5 ones) = inner 3x3, its dilation refills
        // the grid, so the first residual vanishes; iteration 2 leaves only
        // the center pixel
        let d = GridDomain::new(5, 5).unwrap();
        let sq = BinaryMask::full(d).to_scalar();
        let skel = soft_skeleton(&sq, 2).unwrap();
        assert!(skel.sum() < sq.sum());
        let mut expected = BinaryMask::empty(d);
        expected.set(2, 2, true);
        assert_eq!(skel, expected.to_scalar());
    }

    proptest! {
        #[test]
        fn stays_inside_binary_shapes(seed in any::<u64>(), k in 1usize..6) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = BinaryMask::from_fn(GridDomain::new(9, 9).unwrap(), |_, _| rng.random_bool(0.6));
            let g = m.to_scalar();
            let s = soft_skeleton(&g, k).unwrap();
            for (a, b) in s.values().iter().zip(g.values()) {
                prop_assert!(*a <= *b);
                prop_assert!((0.0..=1.0).contains(a));
            }
        }

        #[test]
        fn output_in_unit_range(vals in proptest::collection::vec(0.0f64..=1.0, 49), k in 1usize..5) {
            let g = ScalarGrid::new(GridDomain::new(7, 7).unwrap(), vals).unwrap();
            let s = soft_skeleton(&g, k).unwrap();
            prop_assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
