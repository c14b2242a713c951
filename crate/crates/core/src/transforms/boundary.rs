use super::Connectivity;
use crate::grid::BinaryMask;

/// Foreground pixels with at least one background neighbour. Pixels outside
/// the grid count as background.
pub fn boundary_pixels(mask: &BinaryMask, connectivity: Connectivity) -> BinaryMask {
    let d = mask.domain();
    BinaryMask::from_fn(d, |r, c| {
        mask.get(r, c)
            && connectivity.offsets().iter().any(|&(dr, dc)| {
                d.checked_index(r as isize + dr, c as isize + dc)
                    .is_none_or(|j| !mask.is_set(j))
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDomain;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn full_3x3_ring() {
        let m = BinaryMask::full(GridDomain::new(3, 3).unwrap());
        let b = boundary_pixels(&m, Connectivity::Four);
        assert_eq!(b.count(), 8);
        assert!(!b.get(1, 1));
    }

    #[test]
    fn single_pixel_and_empty() {
        let d = GridDomain::new(3, 3).unwrap();
        let mut m = BinaryMask::empty(d);
        assert!(boundary_pixels(&m, Connectivity::Eight).is_empty());
        m.set(1, 1, true);
        assert_eq!(boundary_pixels(&m, Connectivity::Eight), m);
    }

    #[test]
    fn connectivity_matters_for_diagonal_notch() {
        // center of a plus shape has only diagonal background neighbours
        let m = BinaryMask::from_rows(&[[0, 1, 0], [1, 1, 1], [0, 1, 0]]).unwrap();
        assert!(!boundary_pixels(&m, Connectivity::Four).get(1, 1));
        assert!(boundary_pixels(&m, Connectivity::Eight).get(1, 1));
    }

    proptest! {
        #[test]
        fn boundary_is_subset(seed in any::<u64>(), h in 1usize..12, w in 1usize..12) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = BinaryMask::from_fn(GridDomain::new(h, w).unwrap(), |_, _| rng.random_bool(0.6));
            for conn in [Connectivity::Four, Connectivity::Eight] {
                let b = boundary_pixels(&m, conn);
                for i in 0..m.domain().len() {
                    prop_assert!(!b.is_set(i) || m.is_set(i));
                }
            }
        }
    }
}
