//! Exact Euclidean distance transform.
//!
//! Two separable passes over squared distances: a per-column scan for the
//! nearest source pixel in the same column, then a per-row lower envelope of
//! parabolas. Envelope breakpoints are kept as exact rationals so every
//! squared distance is an exact integer.

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, GridDomain, ScalarGrid};

const INF: u64 = u64::MAX;

/// Unsigned distance of every pixel to the nearest source pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    squared: Vec<u64>,
    distances: ScalarGrid,
}

impl DistanceMap {
    pub fn domain(&self) -> GridDomain {
        self.distances.domain()
    }

    /// Exact squared distances in pixel units.
    pub fn squared(&self) -> &[u64] {
        &self.squared
    }

    pub fn grid(&self) -> &ScalarGrid {
        &self.distances
    }

    pub fn into_grid(self) -> ScalarGrid {
        self.distances
    }
}

/// Signed distance map: negative inside the object, positive outside.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedDistanceMap {
    grid: ScalarGrid,
    empty: bool,
}

impl SignedDistanceMap {
    /// Wraps an externally computed map (e.g. one read from a PSG1 file).
    pub fn from_grid(grid: ScalarGrid) -> Self {
        Self { grid, empty: false }
    }

    pub fn domain(&self) -> GridDomain {
        self.grid.domain()
    }

    pub fn grid(&self) -> &ScalarGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        self.grid.values()
    }

    /// True when the source mask was uniform and the map is all zeros.
    pub fn is_degenerate(&self) -> bool {
        self.empty
    }
}

/// Breakpoint `num / den` with `den > 0`; `None` stands for minus infinity.
type Breakpoint = Option<(i128, i128)>;

fn breakpoint_le(a: (i128, i128), b: Breakpoint) -> bool {
    match b {
        None => false,
        Some(b) => a.0 * b.1 <= b.0 * a.1,
    }
}

/// Lower envelope of `f[q] + (x - q)^2` over the finite entries of `f`.
fn lower_envelope(
    f: &[u64],
    out: &mut [u64],
    sites: &mut Vec<usize>,
    bounds: &mut Vec<Breakpoint>,
) {
    sites.clear();
    bounds.clear();
    for q in 0..f.len() {
        if f[q] == INF {
            continue;
        }
        let mut start: Breakpoint = None;
        while let Some(&p) = sites.last() {
            let num = (i128::from(f[q]) + (q * q) as i128) - (i128::from(f[p]) + (p * p) as i128);
            let den = 2 * (q as i128 - p as i128);
            let s = (num, den);
            if breakpoint_le(s, *bounds.last().unwrap()) {
                sites.pop();
                bounds.pop();
            } else {
                start = Some(s);
                break;
            }
        }
        sites.push(q);
        bounds.push(start);
    }
    if sites.is_empty() {
        out.fill(INF);
        return;
    }
    let mut k = 0;
    for (x, slot) in out.iter_mut().enumerate() {
        while k + 1 < sites.len() {
            let (num, den) = bounds[k + 1].expect("only the first breakpoint is unbounded");
            if num < (x as i128) * den {
                k += 1;
            } else {
                break;
            }
        }
        let dx = x.abs_diff(sites[k]) as u64;
        *slot = f[sites[k]] + dx * dx;
    }
}

/// Exact squared distance from each pixel to the nearest source pixel.
pub fn squared_edt(source: &BinaryMask) -> Result<Vec<u64>> {
    if source.is_empty() {
        return Err(Error::EmptySource);
    }
    let d = source.domain();
    let (h, w) = (d.height(), d.width());

    // column pass: squared distance to the nearest source pixel in the same column
    let mut cols = vec![INF; d.len()];
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if source.is_set(r * w + c) {
                last = Some(r);
            }
            if let Some(l) = last {
                let dr = (r - l) as u64;
                cols[r * w + c] = dr * dr;
            }
        }
        let mut next: Option<usize> = None;
        for r in (0..h).rev() {
            if source.is_set(r * w + c) {
                next = Some(r);
            }
            if let Some(n) = next {
                let dr = (n - r) as u64;
                let i = r * w + c;
                cols[i] = cols[i].min(dr * dr);
            }
        }
    }

    // row pass
    let mut out = vec![0u64; d.len()];
    let mut sites = Vec::with_capacity(w);
    let mut bounds = Vec::with_capacity(w);
    for r in 0..h {
        let row = r * w..(r + 1) * w;
        lower_envelope(&cols[row.clone()], &mut out[row], &mut sites, &mut bounds);
    }
    Ok(out)
}

/// Euclidean distance transform: distance from each pixel center to the
/// nearest source pixel center. Fails on an empty source.
pub fn edt(source: &BinaryMask) -> Result<DistanceMap> {
    let squared = squared_edt(source)?;
    let values = squared.iter().map(|&s| (s as f64).sqrt()).collect();
    Ok(DistanceMap {
        squared,
        distances: ScalarGrid::from_vec_unchecked(source.domain(), values),
    })
}

/// Signed distance map: `+edt(foreground)` on background pixels and
/// `-edt(background)` on foreground pixels. Uniform masks give the all-zero
/// map with the degenerate flag set.
pub fn signed_distance(mask: &BinaryMask) -> SignedDistanceMap {
    let domain = mask.domain();
    if mask.is_uniform() {
        return SignedDistanceMap {
            grid: ScalarGrid::zeros(domain),
            empty: true,
        };
    }
    let to_fg = squared_edt(mask).expect("non-uniform mask has foreground");
    let to_bg = squared_edt(&mask.complement()).expect("non-uniform mask has background");
    let values = (0..domain.len())
        .map(|i| {
            if mask.is_set(i) {
                -(to_bg[i] as f64).sqrt()
            } else {
                (to_fg[i] as f64).sqrt()
            }
        })
        .collect();
    SignedDistanceMap {
        grid: ScalarGrid::from_vec_unchecked(domain, values),
        empty: false,
    }
}

/// Distance of each pixel to the nearest pixel of the opposite class; zeros
/// for uniform masks.
pub fn opposite_class_distance(mask: &BinaryMask) -> ScalarGrid {
    let phi = signed_distance(mask);
    let values = phi.values().iter().map(|v| v.abs()).collect();
    ScalarGrid::from_vec_unchecked(mask.domain(), values)
}
