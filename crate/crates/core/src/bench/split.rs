//! Seeded train/validation partitions for Monte-Carlo runs.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Item indices of one partition, each side in ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Shuffles `0..n` with `seed` and keeps `round(fraction * n)` items for
/// training, clamped so both sides are non-empty.
pub fn split(n: usize, fraction: f64, seed: u64) -> Result<Split> {
    if n < 2 {
        return Err(Error::param(format!(
            "splitting needs at least 2 items, got {n}"
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!(
            "split fraction {fraction} is outside (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut train = order[..n_train].to_vec();
    let mut val = order[n_train..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    Ok(Split { train, val })
}

/// Shared validation items of two partitions and their Jaccard index.
pub fn val_overlap(a: &Split, b: &Split) -> (usize, f64) {
    let shared = a
        .val
        .iter()
        .filter(|i| b.val.binary_search(i).is_ok())
        .count();
    let union = a.val.len() + b.val.len() - shared;
    let jaccard = if union == 0 {
        1.0
    } else {
        shared as f64 / union as f64
    };
    (shared, jaccard)
}
