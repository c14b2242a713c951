//! Synthetic datasets with controllable structure size and instance count.
//!
//! Each item pairs a ground truth with an imperfect initial logit field,
//! the stand-in for a network's raw output. The initial logits are a soft
//! signed distance of a corrupted copy of the truth plus Gaussian noise:
//! the corruption shifts boundaries by erosion or dilation, breaks thin
//! structures and adds spurious islands away from the truth.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, GridDomain};
use crate::losses::SizeBounds;
use crate::refiner::LogitField;
use crate::transforms::{
    connected_components, opposite_class_distance, signed_distance, Connectivity,
};

const MAX_ATTEMPTS: usize = 400;
const PLACEMENT_TRIES: usize = 60;

/// Shape archetypes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Compact organs (one or several well-separated instances).
    Blob,
    /// Many small lesions, possibly none.
    MultiLesion,
    /// A ring, like a myocardium cross-section.
    Annulus,
    /// Thin curvilinear structures.
    Vessel,
    /// Two adjacent classes: an inner region and a crescent around it.
    TwoTissue,
}

impl Family {
    pub fn classes(self) -> usize {
        match self {
            Family::TwoTissue => 2,
            _ => 1,
        }
    }

    pub fn structure_names(self) -> &'static [&'static str] {
        match self {
            Family::Blob => &["organ"],
            Family::MultiLesion => &["lesion"],
            Family::Annulus => &["ring"],
            Family::Vessel => &["vessel"],
            Family::TwoTissue => &["inner", "outer"],
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Blob => "blob",
            Family::MultiLesion => "multi-lesion",
            Family::Annulus => "annulus",
            Family::Vessel => "vessel",
            Family::TwoTissue => "two-tissue",
        })
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blob" => Ok(Family::Blob),
            "multi-lesion" | "lesion" => Ok(Family::MultiLesion),
            "annulus" => Ok(Family::Annulus),
            "vessel" => Ok(Family::Vessel),
            "two-tissue" => Ok(Family::TwoTissue),
            other => Err(Error::param(format!("unknown family {other:?}"))),
        }
    }
}

/// Parameters of a synthetic dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub family: Family,
    pub domain: GridDomain,
    /// Inclusive range of connected components per class.
    pub instances: (usize, usize),
    /// Inclusive range of the structure size, percent of pixels.
    pub size_pct: (f64, f64),
    /// Standard deviation of the additive logit noise.
    pub noise: f64,
    /// Corruption strength in pixels (boundary shift, gap radius).
    pub perturbation: usize,
    /// Maximum number of spurious islands per class.
    pub spurious: usize,
    /// Logit magnitude per pixel of signed distance.
    pub logit_slope: f64,
    /// Logits are clipped to `[-clip, clip]` before noise is added.
    pub logit_clip: f64,
    /// Input modality count; recorded only.
    pub modalities: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Defaults loosely shaped after the corresponding dataset archetypes.
    pub fn new(family: Family, domain: GridDomain) -> Self {
        let (instances, size_pct, perturbation, spurious) = match family {
            Family::Blob => ((1, 1), (5.0, 10.0), 2, 1),
            Family::MultiLesion => ((0, 5), (0.2, 2.0), 1, 1),
            Family::Annulus => ((1, 1), (4.0, 10.0), 1, 1),
            Family::Vessel => ((1, 3), (2.0, 6.0), 2, 1),
            Family::TwoTissue => ((1, 1), (8.0, 20.0), 2, 1),
        };
        Self {
            family,
            domain,
            instances,
            size_pct,
            noise: 0.3,
            perturbation,
            spurious,
            logit_slope: 1.5,
            logit_clip: 6.0,
            modalities: 1,
            seed: 0,
        }
    }

    pub fn classes(&self) -> usize {
        self.family.classes()
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.size_pct;
        if !(lo > 0.0 && lo <= hi && hi < 100.0) {
            return Err(Error::param(format!(
                "size range [{lo}, {hi}]% must lie inside (0, 100)"
            )));
        }
        let (imin, imax) = self.instances;
        if imin > imax {
            return Err(Error::param("instance range is inverted"));
        }
        match self.family {
            Family::Annulus | Family::TwoTissue if (imin, imax) != (1, 1) => {
                return Err(Error::param(format!(
                    "{} structures have exactly one instance",
                    self.family
                )));
            }
            Family::Blob | Family::Vessel if imin == 0 => {
                return Err(Error::param(format!(
                    "{} items need at least one instance",
                    self.family
                )));
            }
            _ => {}
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::param("noise must be non-negative"));
        }
        if !(self.logit_slope > 0.0 && self.logit_clip > 0.0) {
            return Err(Error::param("logit slope and clip must be positive"));
        }
        Ok(())
    }

    /// Checks a ground truth against the size and instance ranges. The size
    /// range applies to the union of all classes and only when it is
    /// non-empty.
    pub fn check_truth(&self, truth: &[BinaryMask]) -> Result<()> {
        let n = self.domain.len() as f64;
        let mut union = BinaryMask::empty(self.domain);
        for (c, m) in truth.iter().enumerate() {
            let count = connected_components(m, Connectivity::Eight).count();
            let (imin, imax) = self.instances;
            if count < imin || count > imax {
                return Err(Error::param(format!(
                    "class {c} has {count} components, expected {imin}..={imax}"
                )));
            }
            union = union.union(m)?;
        }
        if !union.is_empty() {
            let pct = 100.0 * union.count() as f64 / n;
            let (lo, hi) = self.size_pct;
            if pct < lo || pct > hi {
                return Err(Error::param(format!(
                    "size {pct:.3}% is outside [{lo}, {hi}]%"
                )));
            }
        }
        Ok(())
    }
}

/// One synthetic example.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetItem {
    pub id: usize,
    /// Initial logits: one channel for a single class, background plus one
    /// channel per class otherwise.
    pub logits: LogitField,
    /// Ground truth per foreground class.
    pub truth: Vec<BinaryMask>,
    /// Per-class size band around the true size.
    pub bounds: Vec<SizeBounds>,
}

impl DatasetItem {
    pub fn true_sizes(&self) -> Vec<usize> {
        self.truth.iter().map(|m| m.count()).collect()
    }
}

/// SplitMix64 step; decorrelates per-item seeds.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Size-bound margin used for the per-item bands stored on each item.
pub const DEFAULT_SIZE_MARGIN: f64 = 0.1;

/// Generates `n` items. Deterministic in the spec's seed.
pub fn generate(spec: &SyntheticSpec, n: usize) -> Result<Vec<DatasetItem>> {
    if n == 0 {
        return Err(Error::param("at least one item must be generated"));
    }
    spec.validate()?;
    (0..n).map(|id| generate_item(spec, id)).collect()
}

fn generate_item(spec: &SyntheticSpec, id: usize) -> Result<DatasetItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, id as u64));
    let mut last_error = String::new();
    for _ in 0..MAX_ATTEMPTS {
        let Some(truth) = draw_truth(spec, &mut rng) else {
            last_error = "could not place all instances".into();
            continue;
        };
        match spec.check_truth(&truth) {
            Ok(()) => {
                let logits = corrupt(spec, &truth, &mut rng)?;
                let bounds = truth
                    .iter()
                    .map(|m| SizeBounds::around(m.count() as f64, DEFAULT_SIZE_MARGIN))
                    .collect::<Result<_>>()?;
                return Ok(DatasetItem {
                    id,
                    logits,
                    truth,
                    bounds,
                });
            }
            Err(e) => last_error = e.to_string(),
        }
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: format!("item {id}: {last_error}"),
    })
}

fn ellipse(domain: GridDomain, cy: f64, cx: f64, ry: f64, rx: f64, theta: f64) -> BinaryMask {
    let (s, c) = theta.sin_cos();
    BinaryMask::from_fn(domain, |r, col| {
        let (dy, dx) = (r as f64 - cy, col as f64 - cx);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / rx).powi(2) + (v / ry).powi(2) <= 1.0
    })
}

/// 8-neighbourhood dilation by one pixel.
fn dilate(mask: &BinaryMask) -> BinaryMask {
    let d = mask.domain();
    BinaryMask::from_fn(d, |r, c| {
        (-1..=1).any(|dr| {
            (-1..=1).any(|dc| {
                d.checked_index(r as isize + dr, c as isize + dc)
                    .is_some_and(|j| mask.is_set(j))
            })
        })
    })
}

/// 8-neighbourhood erosion by one pixel; the border counts as background.
fn erode(mask: &BinaryMask) -> BinaryMask {
    dilate(&mask.complement()).complement()
}

fn touches(a: &BinaryMask, b: &BinaryMask) -> bool {
    dilate(a).intersection_count(b).expect("same domain") > 0
}

/// Places `count` non-touching ellipses with the given areas.
fn place_ellipses(
    domain: GridDomain,
    areas: &[f64],
    aspect: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> Option<BinaryMask> {
    let (h, w) = (domain.height() as f64, domain.width() as f64);
    let mut acc = BinaryMask::empty(domain);
    for &area in areas {
        let mut placed = false;
        for _ in 0..PLACEMENT_TRIES {
            let ratio = rng.random_range(aspect.0..=aspect.1);
            let ry = (area / (PI * ratio)).sqrt().max(0.5);
            let rx = (ry * ratio).max(0.5);
            let margin = ry.max(rx) + 1.0;
            if 2.0 * margin >= h || 2.0 * margin >= w {
                return None;
            }
            let cy = rng.random_range(margin..h - margin);
            let cx = rng.random_range(margin..w - margin);
            let theta = rng.random_range(0.0..PI);
            let shape = ellipse(domain, cy, cx, ry, rx, theta);
            if shape.is_empty() || touches(&shape, &acc) {
                continue;
            }
            acc = acc.union(&shape).expect("same domain");
            placed = true;
            break;
        }
        if !placed {
            return None;
        }
    }
    Some(acc)
}

fn draw_truth(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Option<Vec<BinaryMask>> {
    let d = spec.domain;
    let n_px = d.len() as f64;
    let (lo, hi) = spec.size_pct;
    let total = rng.random_range(lo..=hi) / 100.0 * n_px;
    let (imin, imax) = spec.instances;
    match spec.family {
        Family::Blob | Family::MultiLesion => {
            let count = rng.random_range(imin..=imax);
            if count == 0 {
                return Some(vec![BinaryMask::empty(d)]);
            }
            let areas: Vec<f64> = (0..count)
                .map(|_| total / count as f64 * rng.random_range(0.75..1.25))
                .collect();
            let aspect = if spec.family == Family::Blob {
                (0.6, 1.0)
            } else {
                (0.5, 1.0)
            };
            place_ellipses(d, &areas, aspect, rng).map(|m| vec![m])
        }
        Family::Annulus => {
            let rho = rng.random_range(0.5..0.7);
            let outer = (total / (PI * (1.0 - rho * rho))).sqrt();
            let inner = outer * rho;
            let margin = outer + 1.0;
            let (h, w) = (d.height() as f64, d.width() as f64);
            if 2.0 * margin >= h || 2.0 * margin >= w {
                return None;
            }
            let cy = rng.random_range(margin..h - margin);
            let cx = rng.random_range(margin..w - margin);
            let ring = BinaryMask::from_fn(d, |r, c| {
                let rr = ((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)).sqrt();
                rr <= outer && rr > inner
            });
            Some(vec![ring])
        }
        Family::Vessel => {
            let count = rng.random_range(imin..=imax);
            let mut acc = BinaryMask::empty(d);
            for _ in 0..count {
                let length = total / count as f64 * rng.random_range(0.8..1.2);
                let curve = draw_curve(d, length, rng)?;
                if touches(&curve, &acc) {
                    return None;
                }
                acc = acc.union(&curve).expect("same domain");
            }
            Some(vec![acc])
        }
        Family::TwoTissue => {
            // inner ellipse plus an offset outer ellipse; the outer class is
            // the crescent between them
            let inner_share = rng.random_range(0.35..0.55);
            let inner_area = total * inner_share;
            let ratio = rng.random_range(0.7..1.0);
            let ry = (inner_area / (PI * ratio)).sqrt();
            let rx = ry * ratio;
            let outer_area = total;
            let scale = (outer_area / inner_area).sqrt();
            let (ory, orx) = (ry * scale, rx * scale);
            let shift = rng.random_range(0.0..0.5) * (ory - ry);
            let (h, w) = (d.height() as f64, d.width() as f64);
            let margin = ory.max(orx) + shift + 1.0;
            if 2.0 * margin >= h || 2.0 * margin >= w {
                return None;
            }
            let cy = rng.random_range(margin..h - margin);
            let cx = rng.random_range(margin..w - margin);
            let inner = ellipse(d, cy - shift, cx, ry, rx, 0.0);
            let outer = ellipse(d, cy, cx, ory, orx, 0.0);
            let crescent = BinaryMask::from_fn(d, |r, c| outer.get(r, c) && !inner.get(r, c));
            Some(vec![inner, crescent])
        }
    }
}

/// A smooth random walk about one pixel wide, `length` pixels long.
fn draw_curve(d: GridDomain, length: f64, rng: &mut ChaCha8Rng) -> Option<BinaryMask> {
    let (h, w) = (d.height() as f64, d.width() as f64);
    let mut mask = BinaryMask::empty(d);
    let (mut y, mut x) = (
        rng.random_range(3.0..h - 3.0),
        rng.random_range(3.0..w - 3.0),
    );
    let mut heading = rng.random_range(0.0..2.0 * PI);
    let bend = Normal::new(0.0, 0.12).expect("valid normal");
    let mut drawn = 0usize;
    let mut steps = 0;
    while (drawn as f64) < length {
        steps += 1;
        if steps > 20 * d.len() {
            return None;
        }
        let (r, c) = (y.round(), x.round());
        if r < 1.0 || c < 1.0 || r > h - 2.0 || c > w - 2.0 {
            // turn back toward the interior
            heading += PI / 2.0;
            y = y.clamp(1.0, h - 2.0);
            x = x.clamp(1.0, w - 2.0);
            continue;
        }
        let (r, c) = (r as usize, c as usize);
        if !mask.get(r, c) {
            mask.set(r, c, true);
            drawn += 1;
        }
        heading += bend.sample(rng);
        y += 0.5 * heading.sin();
        x += 0.5 * heading.cos();
    }
    Some(mask)
}

/// Small discs away from `avoid`.
fn spurious_islands(
    d: GridDomain,
    avoid: &BinaryMask,
    max_count: usize,
    rng: &mut ChaCha8Rng,
) -> BinaryMask {
    let mut out = BinaryMask::empty(d);
    if max_count == 0 {
        return out;
    }
    let count = rng.random_range(0..=max_count);
    let clearance = if avoid.is_empty() {
        None
    } else {
        Some(opposite_class_distance(avoid))
    };
    for _ in 0..count {
        for _ in 0..PLACEMENT_TRIES {
            let r = rng.random_range(0..d.height());
            let c = rng.random_range(0..d.width());
            let far = clearance
                .as_ref()
                .is_none_or(|dist| !avoid.get(r, c) && dist.get(r, c) >= 6.0);
            if far {
                let radius = rng.random_range(0.8..1.8);
                let disc = ellipse(d, r as f64, c as f64, radius, radius, 0.0);
                out = out.union(&disc).expect("same domain");
                break;
            }
        }
    }
    out
}

/// Removes small discs centred on random structure pixels.
fn cut_gaps(mask: &BinaryMask, gaps: usize, radius: f64, rng: &mut ChaCha8Rng) -> BinaryMask {
    let on: Vec<usize> = mask.foreground_indices().collect();
    let mut out = mask.clone();
    if on.is_empty() {
        return out;
    }
    let d = mask.domain();
    for _ in 0..gaps {
        let (cy, cx) = d.coords(on[rng.random_range(0..on.len())]);
        let hole = ellipse(d, cy as f64, cx as f64, radius, radius, 0.0);
        out = BinaryMask::from_fn(d, |r, c| out.get(r, c) && !hole.get(r, c));
    }
    out
}

fn corrupt_mask(spec: &SyntheticSpec, truth: &BinaryMask, rng: &mut ChaCha8Rng) -> BinaryMask {
    let d = spec.domain;
    let mut m = truth.clone();
    if spec.perturbation > 0 {
        match spec.family {
            Family::Vessel => {
                let gaps = rng.random_range(1..=spec.perturbation + 1);
                m = cut_gaps(&m, gaps, 1.5, rng);
            }
            _ => {
                let steps = rng.random_range(1..=spec.perturbation);
                let grow = rng.random_bool(0.5);
                for _ in 0..steps {
                    m = if grow { dilate(&m) } else { erode(&m) };
                }
            }
        }
    }
    let islands = spurious_islands(d, truth, spec.spurious, rng);
    m.union(&islands).expect("same domain")
}

fn soft_logits(spec: &SyntheticSpec, m: &BinaryMask) -> Vec<f64> {
    let clip = spec.logit_clip;
    if m.is_empty() {
        return vec![-clip; m.domain().len()];
    }
    if m.is_uniform() {
        return vec![clip; m.domain().len()];
    }
    signed_distance(m)
        .values()
        .iter()
        .map(|&phi| (-spec.logit_slope * phi).clamp(-clip, clip))
        .collect()
}

fn corrupt(spec: &SyntheticSpec, truth: &[BinaryMask], rng: &mut ChaCha8Rng) -> Result<LogitField> {
    let noise = Normal::new(0.0, spec.noise.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut channels: Vec<Vec<f64>> = Vec::new();
    if truth.len() > 1 {
        channels.push(vec![0.0; spec.domain.len()]);
    }
    for m in truth {
        let corrupted = corrupt_mask(spec, m, rng);
        let mut logits = soft_logits(spec, &corrupted);
        if spec.noise > 0.0 {
            for z in &mut logits {
                *z += noise.sample(rng);
            }
        }
        channels.push(logits);
    }
    let n = channels.len();
    LogitField::new(spec.domain, n, channels.concat())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(family: Family) -> SyntheticSpec {
        SyntheticSpec {
            seed: 42,
            ..SyntheticSpec::new(family, GridDomain::new(64, 64).unwrap())
        }
    }

    #[test]
    fn blob_items_respect_size_and_count() {
        let s = SyntheticSpec {
            size_pct: (5.0, 10.0),
            ..spec(Family::Blob)
        };
        for item in generate(&s, 12).unwrap() {
            let m = &item.truth[0];
            assert_eq!(connected_components(m, Connectivity::Eight).count(), 1);
            let pct = 100.0 * m.count() as f64 / 4096.0;
            assert!((5.0..=10.0).contains(&pct), "{pct}");
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let s = spec(Family::MultiLesion);
        assert_eq!(generate(&s, 6).unwrap(), generate(&s, 6).unwrap());
        let other = SyntheticSpec {
            seed: 43,
            ..s.clone()
        };
        assert_ne!(generate(&s, 6).unwrap(), generate(&other, 6).unwrap());
    }

    #[test]
    fn multi_lesion_counts_in_range() {
        let s = SyntheticSpec {
            instances: (0, 5),
            ..spec(Family::MultiLesion)
        };
        for item in generate(&s, 20).unwrap() {
            let n = connected_components(&item.truth[0], Connectivity::Eight).count();
            assert!(n <= 5);
        }
    }

    #[test]
    fn every_family_generates_valid_items() {
        for family in [
            Family::Blob,
            Family::MultiLesion,
            Family::Annulus,
            Family::Vessel,
            Family::TwoTissue,
        ] {
            let s = spec(family);
            let items = generate(&s, 5).unwrap();
            for item in &items {
                assert_eq!(item.truth.len(), family.classes());
                s.check_truth(&item.truth).unwrap();
                let expected_channels = if family.classes() == 1 { 1 } else { 3 };
                assert_eq!(item.logits.channels(), expected_channels);
                for (m, b) in item.truth.iter().zip(&item.bounds) {
                    assert!(b.contains(m.count() as f64));
                }
            }
        }
    }

    #[test]
    fn infeasible_spec_fails_after_retries() {
        let s = SyntheticSpec {
            instances: (26, 26),
            size_pct: (50.0, 50.0),
            ..SyntheticSpec::new(Family::MultiLesion, GridDomain::new(16, 16).unwrap())
        };
        assert!(matches!(generate(&s, 1), Err(Error::Generation { .. })));
    }

    #[test]
    fn rejects_invalid_specs() {
        let bad = SyntheticSpec {
            size_pct: (0.0, 5.0),
            ..spec(Family::Blob)
        };
        assert!(generate(&bad, 1).is_err());
        let bad = SyntheticSpec {
            instances: (2, 2),
            ..spec(Family::Annulus)
        };
        assert!(bad.validate().is_err());
        assert!(generate(&spec(Family::Blob), 0).is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in [
            Family::Blob,
            Family::MultiLesion,
            Family::Annulus,
            Family::Vessel,
            Family::TwoTissue,
        ] {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
    }
}
