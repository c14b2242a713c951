//! 3x3 min/max filtering.
//!
//! Min-filtering treats pixels outside the grid as 0, so a binary shape
//! always erodes away from the image border. Max-filtering only looks at
//! in-grid pixels, which equals replicate padding for a 3x3 window.
//!
//! The `*_routed` variants also report, per output pixel, which input pixel
//! supplied the extremum (the first one in row-major window order on ties;
//! `None` when the zero padding wins).

use crate::grid::{GridDomain, ScalarGrid};

pub(crate) fn min_pool3_routed(values: &[f64], domain: GridDomain) -> (Vec<f64>, Vec<Option<u32>>) {
    let mut out = Vec::with_capacity(values.len());
    let mut route = Vec::with_capacity(values.len());
    for r in 0..domain.height() as isize {
        for c in 0..domain.width() as isize {
            let mut best = f64::INFINITY;
            let mut arg = None;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (v, at) = match domain.checked_index(r + dr, c + dc) {
                        Some(j) => (values[j], Some(j as u32)),
                        None => (0.0, None),
                    };
                    if v < best {
                        best = v;
                        arg = at;
                    }
                }
            }
            out.push(best);
            route.push(arg);
        }
    }
    (out, route)
}

pub(crate) fn max_pool3_routed(values: &[f64], domain: GridDomain) -> (Vec<f64>, Vec<Option<u32>>) {
    let mut out = Vec::with_capacity(values.len());
    let mut route = Vec::with_capacity(values.len());
    for r in 0..domain.height() as isize {
        for c in 0..domain.width() as isize {
            let mut best = f64::NEG_INFINITY;
            let mut arg = None;
            for dr in -1..=1 {
                for dc in -1..=1 {
                    if let Some(j) = domain.checked_index(r + dr, c + dc) {
                        if values[j] > best {
                            best = values[j];
                            arg = Some(j as u32);
                        }
                    }
                }
            }
            out.push(best);
            route.push(arg);
        }
    }
    (out, route)
}

/// Separable min over a 3x3 window with zero padding. Equivalent to the
/// routed version's values, minus the bookkeeping.
pub(crate) fn min_pool3_values(values: &[f64], domain: GridDomain) -> Vec<f64> {
    let (h, w) = (domain.height(), domain.width());
    let mut rows = vec![0.0; values.len()];
    for r in 0..h {
        let row = &values[r * w..(r + 1) * w];
        for c in 0..w {
            let left = if c > 0 { row[c - 1] } else { 0.0 };
            let right = if c + 1 < w { row[c + 1] } else { 0.0 };
            rows[r * w + c] = row[c].min(left).min(right);
        }
    }
    let mut out = vec![0.0; values.len()];
    for r in 0..h {
        for c in 0..w {
            let up = if r > 0 { rows[(r - 1) * w + c] } else { 0.0 };
            let down = if r + 1 < h {
                rows[(r + 1) * w + c]
            } else {
                0.0
            };
            out[r * w + c] = rows[r * w + c].min(up).min(down);
        }
    }
    out
}

pub(crate) fn max_pool3_values(values: &[f64], domain: GridDomain) -> Vec<f64> {
    let (h, w) = (domain.height(), domain.width());
    let mut rows = vec![0.0; values.len()];
    for r in 0..h {
        let row = &values[r * w..(r + 1) * w];
        for c in 0..w {
            let mut m = row[c];
            if c > 0 {
                m = m.max(row[c - 1]);
            }
            if c + 1 < w {
                m = m.max(row[c + 1]);
            }
            rows[r * w + c] = m;
        }
    }
    let mut out = vec![0.0; values.len()];
    for r in 0..h {
        for c in 0..w {
            let mut m = rows[r * w + c];
            if r > 0 {
                m = m.max(rows[(r - 1) * w + c]);
            }
            if r + 1 < h {
                m = m.max(rows[(r + 1) * w + c]);
            }
            out[r * w + c] = m;
        }
    }
    out
}

/// Soft erosion: 3x3 min filter, zero outside the grid.
pub fn min_pool3(g: &ScalarGrid) -> ScalarGrid {
    ScalarGrid::from_vec_unchecked(g.domain(), min_pool3_values(g.values(), g.domain()))
}

/// Soft dilation: 3x3 max filter over in-grid pixels.
pub fn max_pool3(g: &ScalarGrid) -> ScalarGrid {
    ScalarGrid::from_vec_unchecked(g.domain(), max_pool3_values(g.values(), g.domain()))
}
