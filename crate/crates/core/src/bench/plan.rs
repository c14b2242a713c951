//! Benchmark plans and their line-oriented file format.
//!
//! ```text
//! # comment
//! [dataset]
//! family = multi-lesion
//! height = 64
//! width = 64
//! items = 40
//! instances = 1..5
//! size_pct = 0.3..1.5
//!
//! [bench]
//! runs = 3
//!
//! [loss]
//! configs = dice, dice+size
//! ```
//!
//! Every key is optional; unknown sections and keys are errors. See
//! [`BenchPlan::parse`] for the full list.

use std::path::{Path, PathBuf};

use super::synthetic::{Family, SyntheticSpec};
use super::SizeBoundsMode;
use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::losses::{LossConfig, Prior, ScheduleState};
use crate::par::Execution;
use crate::refiner::RefineConfig;
use crate::transforms::{Connectivity, DEFAULT_SKELETON_ITERATIONS};

/// Everything needed to reproduce one benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchPlan {
    pub dataset: SyntheticSpec,
    pub items: usize,
    /// Training share of each Monte-Carlo split.
    pub split: f64,
    pub runs: usize,
    /// Seed of the split shuffles; run `r` derives its own from it.
    pub seed: u64,
    pub losses: Vec<LossConfig>,
    /// Prior parameters the loss configurations were built with.
    pub loss_options: LossOptions,
    pub refine: RefineConfig,
    pub size_bounds: SizeBoundsMode,
    pub hd_percentile: f64,
    pub connectivity: Connectivity,
    pub execution: Execution,
    /// Run the Monte-Carlo runs concurrently as well as the items.
    pub parallel_runs: bool,
    pub output: Option<PathBuf>,
}

impl BenchPlan {
    pub fn new(dataset: SyntheticSpec, items: usize) -> Self {
        Self {
            dataset,
            items,
            split: 0.8,
            runs: 3,
            seed: 0,
            losses: vec![LossConfig::dice()],
            loss_options: LossOptions::default(),
            refine: RefineConfig::default(),
            size_bounds: SizeBoundsMode::default(),
            hd_percentile: 95.0,
            connectivity: Connectivity::Eight,
            execution: Execution::default(),
            parallel_runs: false,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.validate()?;
        if self.items < 2 {
            return Err(Error::param("a plan needs at least 2 items"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::param(format!(
                "split {} is outside (0, 1)",
                self.split
            )));
        }
        if self.runs == 0 {
            return Err(Error::param("runs must be at least 1"));
        }
        if self.losses.is_empty() {
            return Err(Error::param("a plan needs at least one loss configuration"));
        }
        let mut names: Vec<String> = self.losses.iter().map(LossConfig::name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.losses.len() {
            return Err(Error::param("loss configurations must be distinct"));
        }
        if !(0.0..=100.0).contains(&self.hd_percentile) {
            return Err(Error::param("hd percentile must be in [0, 100]"));
        }
        if let SizeBoundsMode::PerItem { margin } = self.size_bounds {
            if !(0.0..1.0).contains(&margin) {
                return Err(Error::param("size margin must be in [0, 1)"));
            }
        }
        self.refine.validate()
    }

    /// Parses a plan file. Keys per section:
    ///
    /// * `[dataset]`: family, height, width, items, instances (`lo..hi`),
    ///   size_pct (`lo..hi`), noise, perturbation, spurious, logit_slope,
    ///   logit_clip, modalities, seed
    /// * `[bench]`: split, runs, seed, hd_percentile, connectivity,
    ///   parallel, parallel_runs, output
    /// * `[refine]`: epochs, steps_per_epoch, learning_rate, patience,
    ///   lr_factor, min_improvement
    /// * `[loss]`: configs (comma list), lambda0, lambda_step, lambda_cap,
    ///   skeleton_iters, boundary_normalize, smoothing, size_bounds
    ///   (`per-item` or `dataset`), size_margin
    pub fn parse(text: &str) -> Result<Self> {
        let mut b = Builder::default();
        let mut section = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                line: line_no,
                message,
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("malformed section header {line:?}")))?
                    .trim();
                match name {
                    "dataset" | "bench" | "refine" | "loss" => section = Some(name.to_owned()),
                    other => return Err(err(format!("unknown section [{other}]"))),
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let section = section
                .as_deref()
                .ok_or_else(|| err(format!("key {key:?} appears before any section")))?;
            b.set(section, key, value, line_no).map_err(|e| match e {
                Error::Config { .. } => e,
                other => err(other.to_string()),
            })?;
        }
        b.finish()
    }

    /// Replaces the loss configurations, applying `loss_options` to each.
    pub fn set_losses<S: AsRef<str>>(&mut self, names: &[S]) -> Result<()> {
        self.losses = names
            .iter()
            .map(|n| Ok(self.loss_options.apply(n.as_ref().parse()?)))
            .collect::<Result<_>>()?;
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn at_line(line: usize, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::Config {
            line,
            message: other.to_string(),
        },
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::param(format!("{key}: cannot parse {value:?}")))
}

fn range<T: std::str::FromStr>(key: &str, value: &str) -> Result<(T, T)> {
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| Error::param(format!("{key}: expected `lo..hi`, got {value:?}")))?;
    Ok((num(key, lo.trim())?, num(key, hi.trim())?))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::param(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

#[derive(Default)]
struct Builder {
    family: Option<Family>,
    height: Option<usize>,
    width: Option<usize>,
    dataset: Vec<(String, String, usize)>,
    bench: Vec<(String, String, usize)>,
    refine: Vec<(String, String, usize)>,
    loss: Vec<(String, String, usize)>,
}

impl Builder {
    fn set(&mut self, section: &str, key: &str, value: &str, line: usize) -> Result<()> {
        let entry = (key.to_owned(), value.to_owned(), line);
        match (section, key) {
            ("dataset", "family") => self.family = Some(value.parse()?),
            ("dataset", "height") => self.height = Some(num(key, value)?),
            ("dataset", "width") => self.width = Some(num(key, value)?),
            (
                "dataset",
                "items" | "instances" | "size_pct" | "noise" | "perturbation" | "spurious"
                | "logit_slope" | "logit_clip" | "modalities" | "seed",
            ) => self.dataset.push(entry),
            (
                "bench",
                "split" | "runs" | "seed" | "hd_percentile" | "connectivity" | "parallel"
                | "parallel_runs" | "output",
            ) => self.bench.push(entry),
            (
                "refine",
                "epochs" | "steps_per_epoch" | "learning_rate" | "patience" | "lr_factor"
                | "min_improvement",
            ) => self.refine.push(entry),
            (
                "loss",
                "configs" | "lambda0" | "lambda_step" | "lambda_cap" | "skeleton_iters"
                | "boundary_normalize" | "smoothing" | "size_bounds" | "size_margin",
            ) => self.loss.push(entry),
            _ => return Err(Error::param(format!("unknown key {key:?} in [{section}]"))),
        }
        Ok(())
    }

    fn finish(self) -> Result<BenchPlan> {
        let domain = GridDomain::new(self.height.unwrap_or(64), self.width.unwrap_or(64))?;
        let mut spec = SyntheticSpec::new(self.family.unwrap_or(Family::Blob), domain);
        let mut items = 40;
        for (k, v, line) in &self.dataset {
            let r: Result<()> = (|| {
                match k.as_str() {
                    "items" => items = num(k, v)?,
                    "instances" => spec.instances = range(k, v)?,
                    "size_pct" => spec.size_pct = range(k, v)?,
                    "noise" => spec.noise = num(k, v)?,
                    "perturbation" => spec.perturbation = num(k, v)?,
                    "spurious" => spec.spurious = num(k, v)?,
                    "logit_slope" => spec.logit_slope = num(k, v)?,
                    "logit_clip" => spec.logit_clip = num(k, v)?,
                    "modalities" => spec.modalities = num(k, v)?,
                    "seed" => spec.seed = num(k, v)?,
                    _ => unreachable!("filtered in set"),
                }
                Ok(())
            })();
            r.map_err(|e| at_line(*line, e))?;
        }
        let mut plan = BenchPlan::new(spec, items);
        for (k, v, line) in &self.bench {
            let r: Result<()> = (|| {
                match k.as_str() {
                    "split" => plan.split = num(k, v)?,
                    "runs" => plan.runs = num(k, v)?,
                    "seed" => plan.seed = num(k, v)?,
                    "hd_percentile" => plan.hd_percentile = num(k, v)?,
                    "connectivity" => plan.connectivity = v.parse()?,
                    "parallel" => {
                        plan.execution = if boolean(k, v)? {
                            Execution::Parallel
                        } else {
                            Execution::Sequential
                        }
                    }
                    "parallel_runs" => plan.parallel_runs = boolean(k, v)?,
                    "output" => plan.output = Some(PathBuf::from(v)),
                    _ => unreachable!("filtered in set"),
                }
                Ok(())
            })();
            r.map_err(|e| at_line(*line, e))?;
        }
        let r = &mut plan.refine;
        for (k, v, line) in &self.refine {
            let r: Result<()> = (|| {
                match k.as_str() {
                    "epochs" => r.epochs = num(k, v)?,
                    "steps_per_epoch" => r.steps_per_epoch = num(k, v)?,
                    "learning_rate" => r.learning_rate = num(k, v)?,
                    "patience" => r.patience = num(k, v)?,
                    "lr_factor" => r.lr_factor = num(k, v)?,
                    "min_improvement" => r.min_improvement = num(k, v)?,
                    _ => unreachable!("filtered in set"),
                }
                Ok(())
            })();
            r.map_err(|e| at_line(*line, e))?;
        }
        let mut options = LossOptions::default();
        let mut names = vec!["dice".to_owned()];
        let (mut l0, mut step, mut cap) = {
            let s = ScheduleState::default();
            (s.lambda0(), s.step(), s.cap())
        };
        let mut per_item = true;
        let mut margin = super::synthetic::DEFAULT_SIZE_MARGIN;
        for (k, v, line) in &self.loss {
            let r: Result<()> = (|| {
                match k.as_str() {
                    "configs" => {
                        names = v
                            .split(',')
                            .map(|s| s.trim().to_owned())
                            .filter(|s| !s.is_empty())
                            .collect();
                    }
                    "lambda0" => l0 = num(k, v)?,
                    "lambda_step" => step = num(k, v)?,
                    "lambda_cap" => cap = num(k, v)?,
                    "skeleton_iters" => options.skeleton_iters = num(k, v)?,
                    "boundary_normalize" => options.boundary_normalize = boolean(k, v)?,
                    "smoothing" => options.smoothing = num(k, v)?,
                    "size_bounds" => {
                        per_item = match v.as_str() {
                            "per-item" => true,
                            "dataset" => false,
                            _ => {
                                return Err(Error::param(format!(
                                    "size_bounds: expected per-item or dataset, got {v:?}"
                                )))
                            }
                        }
                    }
                    "size_margin" => margin = num(k, v)?,
                    _ => unreachable!("filtered in set"),
                }
                Ok(())
            })();
            r.map_err(|e| at_line(*line, e))?;
        }
        plan.refine.schedule = ScheduleState::new(l0, step, cap)?;
        plan.size_bounds = if per_item {
            SizeBoundsMode::PerItem { margin }
        } else {
            SizeBoundsMode::DatasetWide
        };
        plan.loss_options = options;
        plan.set_losses(&names)?;
        plan.validate()?;
        Ok(plan)
    }
}

/// Prior parameters shared by every configuration of a plan.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossOptions {
    pub skeleton_iters: usize,
    pub boundary_normalize: bool,
    pub smoothing: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            skeleton_iters: DEFAULT_SKELETON_ITERATIONS,
            boundary_normalize: true,
            smoothing: crate::losses::DEFAULT_SMOOTHING,
        }
    }
}

impl LossOptions {
    pub fn apply(&self, mut cfg: LossConfig) -> LossConfig {
        cfg.smoothing = self.smoothing;
        cfg.prior = cfg.prior.map(|p| match p {
            Prior::Boundary { .. } => Prior::Boundary {
                normalize: self.boundary_normalize,
            },
            Prior::ClDice { .. } => Prior::ClDice {
                iterations: self.skeleton_iters,
            },
            other => other,
        });
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = "
# lesions
[dataset]
family = multi-lesion
height = 32
width = 48
items = 12
instances = 1..4
size_pct = 0.5..2.5
seed = 9

[bench]
runs = 2
split = 0.75
connectivity = 4
parallel = false

[refine]
epochs = 15
learning_rate = 0.25

[loss]
configs = dice, dice+size, cldice
skeleton_iters = 4
lambda_cap = 0.5
size_bounds = dataset
";

    #[test]
    fn parses_every_section() {
        let p = BenchPlan::parse(PLAN).unwrap();
        assert_eq!(p.dataset.family, Family::MultiLesion);
        assert_eq!(
            (p.dataset.domain.height(), p.dataset.domain.width()),
            (32, 48)
        );
        assert_eq!(p.items, 12);
        assert_eq!(p.dataset.instances, (1, 4));
        assert_eq!(p.dataset.size_pct, (0.5, 2.5));
        assert_eq!(p.dataset.seed, 9);
        assert_eq!((p.runs, p.split), (2, 0.75));
        assert_eq!(p.connectivity, Connectivity::Four);
        assert_eq!(p.execution, Execution::Sequential);
        assert_eq!((p.refine.epochs, p.refine.learning_rate), (15, 0.25));
        assert_eq!(p.refine.schedule.cap(), 0.5);
        assert_eq!(p.size_bounds, SizeBoundsMode::DatasetWide);
        let names: Vec<_> = p.losses.iter().map(LossConfig::name).collect();
        assert_eq!(names, ["dice", "dice+size", "dice+cldice"]);
        assert_eq!(p.losses[2].prior, Some(Prior::ClDice { iterations: 4 }));
    }

    #[test]
    fn empty_plan_uses_defaults() {
        let p = BenchPlan::parse("").unwrap();
        assert_eq!(p.runs, 3);
        assert_eq!(p.split, 0.8);
        assert_eq!(p.losses, vec![LossConfig::dice()]);
    }

    #[test]
    fn unknown_keys_report_their_line() {
        let err = BenchPlan::parse("[bench]\nruns = 2\nfoo = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 3, .. }), "{err}");
        let err = BenchPlan::parse("[nope]\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = BenchPlan::parse("runs = 2\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        let err = BenchPlan::parse("[bench]\nruns = many\n").unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(BenchPlan::parse("[bench]\nsplit = 1.0\n").is_err());
        assert!(BenchPlan::parse("[bench]\nruns = 0\n").is_err());
        assert!(BenchPlan::parse("[loss]\nconfigs = dice, dice\n").is_err());
        assert!(BenchPlan::parse("[loss]\nconfigs = focal\n").is_err());
    }
}
