//! Evaluation metrics: Dice score, Hausdorff distance between boundary sets,
//! connected-component count error, and mean ± std aggregation over
//! Monte-Carlo runs.

use crate::error::{Error, Result};
use crate::grid::BinaryMask;
use crate::transforms::{boundary_pixels, connected_components, edt, Connectivity};

/// `2|P ∩ G| / (|P| + |G|)`; two empty masks score 1.
pub fn dice_score(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    let inter = pred.intersection_count(gt)?;
    let total = pred.count() + gt.count();
    if total == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Nearest-rank percentile of unsorted values; `percentile` in (0, 100].
fn nearest_rank(values: &mut [f64], percentile: f64) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let rank = ((percentile / 100.0) * values.len() as f64).ceil() as usize;
    values[rank.clamp(1, values.len()) - 1]
}

/// Distances from each boundary pixel of `from` to the nearest boundary
/// pixel of `to`.
fn directed(from: &BinaryMask, to: &BinaryMask) -> Vec<f64> {
    let dist = edt(to).expect("boundary of a non-empty mask is non-empty");
    from.foreground_indices()
        .map(|i| dist.grid().values()[i])
        .collect()
}

/// Symmetric Hausdorff distance between the boundaries of two masks, in
/// pixels. Each directed distance takes the given percentile (nearest rank)
/// of the per-pixel minimum distances; 100 gives the classic maximum.
/// `None` when either mask is empty.
pub fn hausdorff_distance(
    pred: &BinaryMask,
    gt: &BinaryMask,
    percentile: f64,
    connectivity: Connectivity,
) -> Result<Option<f64>> {
    pred.domain().ensure_same(&gt.domain())?;
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::param(format!(
            "percentile {percentile} is outside (0, 100]"
        )));
    }
    if pred.is_empty() || gt.is_empty() {
        return Ok(None);
    }
    let bp = boundary_pixels(pred, connectivity);
    let bg = boundary_pixels(gt, connectivity);
    let h1 = nearest_rank(&mut directed(&bp, &bg), percentile);
    let h2 = nearest_rank(&mut directed(&bg, &bp), percentile);
    Ok(Some(h1.max(h2)))
}

/// Mean over pairs of `|#components(pred) - #components(gt)|`.
pub fn cc_mae(pairs: &[(&BinaryMask, &BinaryMask)], connectivity: Connectivity) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::param(
            "component-count error needs at least one pair",
        ));
    }
    let mut total = 0.0;
    for (pred, gt) in pairs {
        pred.domain().ensure_same(&gt.domain())?;
        total += cc_error(pred, gt, connectivity) as f64;
    }
    Ok(total / pairs.len() as f64)
}

pub(crate) fn cc_error(pred: &BinaryMask, gt: &BinaryMask, connectivity: Connectivity) -> usize {
    connected_components(pred, connectivity)
        .count()
        .abs_diff(connected_components(gt, connectivity).count())
}

/// Metrics of one predicted structure against its ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRecord {
    pub dsc: f64,
    /// `None` when either mask is empty.
    pub hd: Option<f64>,
    pub cc_error: f64,
}

impl MetricRecord {
    pub fn evaluate(
        pred: &BinaryMask,
        gt: &BinaryMask,
        percentile: f64,
        connectivity: Connectivity,
    ) -> Result<Self> {
        Ok(Self {
            dsc: dice_score(pred, gt)?,
            hd: hausdorff_distance(pred, gt, percentile, connectivity)?,
            cc_error: cc_error(pred, gt, connectivity) as f64,
        })
    }
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

/// Per-metric mean ± std across runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AggregateRecord {
    pub dsc: MeanStd,
    /// `None` when no run had a defined Hausdorff distance.
    pub hd: Option<MeanStd>,
    /// Records whose Hausdorff distance was undefined, over all runs.
    pub hd_excluded: usize,
    pub cc_error: MeanStd,
    pub runs: usize,
}

/// Per-run means of one run's records: `(dsc, hd, hd_excluded, cc_error)`.
pub fn run_means(records: &[MetricRecord]) -> Option<(f64, Option<f64>, usize, f64)> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let dsc = records.iter().map(|r| r.dsc).sum::<f64>() / n;
    let cc = records.iter().map(|r| r.cc_error).sum::<f64>() / n;
    let hds: Vec<f64> = records.iter().filter_map(|r| r.hd).collect();
    let hd = MeanStd::of(&hds).map(|m| m.mean);
    Some((dsc, hd, records.len() - hds.len(), cc))
}

/// Averages each run first, then takes mean ± population std across runs.
/// Runs with no records are skipped; fails if none remain.
pub fn aggregate(runs: &[Vec<MetricRecord>]) -> Result<AggregateRecord> {
    let mut dsc = Vec::new();
    let mut hd = Vec::new();
    let mut cc = Vec::new();
    let mut excluded = 0;
    for records in runs {
        if let Some((d, h, ex, c)) = run_means(records) {
            dsc.push(d);
            cc.push(c);
            hd.extend(h);
            excluded += ex;
        }
    }
    let runs = dsc.len();
    Ok(AggregateRecord {
        dsc: MeanStd::of(&dsc).ok_or_else(|| Error::param("aggregation needs at least one run"))?,
        hd: MeanStd::of(&hd),
        hd_excluded: excluded,
        cc_error: MeanStd::of(&cc).expect("same length as dsc"),
        runs,
    })
}
