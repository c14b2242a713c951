//! Benchmark execution: every Monte-Carlo run refines every validation
//! item under every loss configuration.

use super::plan::BenchPlan;
use super::split::{split, Split};
use super::synthetic::{generate, mix_seed, DatasetItem};
use super::SizeBoundsMode;
use crate::error::Result;
use crate::losses::{ClassTarget, SizeBounds};
use crate::metrics::{aggregate, AggregateRecord, MeanStd, MetricRecord};
use crate::refiner::{refine, RefineConfig};

/// Metrics of one refined validation item.
#[derive(Clone, Debug, PartialEq)]
pub struct ItemOutcome {
    pub run: usize,
    /// Index into the plan's loss configurations.
    pub config: usize,
    pub item: usize,
    /// One record per class.
    pub records: Vec<MetricRecord>,
    /// `|predicted - true| / max(true, 1)` per class, hard pixel counts.
    pub size_error: Vec<f64>,
    pub true_size: Vec<usize>,
}

/// A refinement that aborted; the run continues without it.
#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub run: usize,
    pub config: usize,
    pub item: usize,
    pub message: String,
}

/// Raw benchmark results in deterministic order (run, config, item).
#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub structures: Vec<String>,
    pub configs: Vec<String>,
    pub runs: usize,
    /// Pixels per item, for size percentages.
    pub pixels: usize,
    pub splits: Vec<Split>,
    pub outcomes: Vec<ItemOutcome>,
    pub failures: Vec<Failure>,
}

impl RunReport {
    /// Index of the Dice-only configuration, if the plan has one.
    pub fn baseline(&self) -> Option<usize> {
        self.configs.iter().position(|c| c == "dice")
    }

    fn per_run<T>(&self, config: usize, f: impl Fn(&ItemOutcome) -> T) -> Vec<Vec<T>> {
        let mut out: Vec<Vec<T>> = (0..self.runs).map(|_| Vec::new()).collect();
        for o in self.outcomes.iter().filter(|o| o.config == config) {
            out[o.run].push(f(o));
        }
        out
    }

    /// Per-run records of one configuration and class.
    pub fn records(&self, config: usize, class: usize) -> Vec<Vec<MetricRecord>> {
        self.per_run(config, |o| o.records[class])
    }

    /// Mean ± std across runs; `None` when every item of the cell failed.
    pub fn aggregate(&self, config: usize, class: usize) -> Option<AggregateRecord> {
        aggregate(&self.records(config, class)).ok()
    }

    /// Per-run mean of one configuration's metric for one class.
    pub fn run_means(
        &self,
        config: usize,
        class: usize,
        f: impl Fn(&MetricRecord) -> Option<f64>,
    ) -> Vec<Option<f64>> {
        self.records(config, class)
            .iter()
            .map(|rs| {
                let v: Vec<f64> = rs.iter().filter_map(&f).collect();
                MeanStd::of(&v).map(|m| m.mean)
            })
            .collect()
    }

    /// Relative size error, run means first.
    pub fn size_error(&self, config: usize, class: usize) -> Option<MeanStd> {
        let means: Vec<f64> = self
            .per_run(config, |o| o.size_error[class])
            .iter()
            .filter_map(|v| MeanStd::of(v).map(|m| m.mean))
            .collect();
        MeanStd::of(&means)
    }
}

/// Size bands handed to the size loss for each validation item.
fn bounds_for(
    plan: &BenchPlan,
    items: &[DatasetItem],
    split: &Split,
) -> Result<Vec<Vec<SizeBounds>>> {
    let classes = plan.dataset.classes();
    match plan.size_bounds {
        SizeBoundsMode::PerItem { margin } => split
            .val
            .iter()
            .map(|&i| {
                items[i]
                    .true_sizes()
                    .iter()
                    .map(|&s| SizeBounds::around(s as f64, margin))
                    .collect()
            })
            .collect(),
        SizeBoundsMode::DatasetWide => {
            let mut lo = vec![usize::MAX; classes];
            let mut hi = vec![0; classes];
            for &i in &split.train {
                for (c, s) in items[i].true_sizes().into_iter().enumerate() {
                    lo[c] = lo[c].min(s);
                    hi[c] = hi[c].max(s);
                }
            }
            let band = lo
                .iter()
                .zip(&hi)
                .map(|(&a, &b)| SizeBounds::new(a as f64, b as f64))
                .collect::<Result<Vec<_>>>()?;
            Ok(vec![band; split.val.len()])
        }
    }
}

fn evaluate_item(
    plan: &BenchPlan,
    item: &DatasetItem,
    bounds: &[SizeBounds],
    cfg: &RefineConfig,
) -> Result<(Vec<MetricRecord>, Vec<f64>)> {
    let targets: Vec<ClassTarget> = item
        .truth
        .iter()
        .zip(bounds)
        .map(|(m, &b)| ClassTarget::new(m.clone(), Some(b)))
        .collect();
    let (pred, _) = refine(&item.logits, &targets, cfg)?;
    let mut records = Vec::with_capacity(targets.len());
    let mut size_error = Vec::with_capacity(targets.len());
    for (p, g) in pred.masks().iter().zip(&item.truth) {
        records.push(MetricRecord::evaluate(
            p,
            g,
            plan.hd_percentile,
            plan.connectivity,
        )?);
        let (ap, ag) = (p.count() as f64, g.count() as f64);
        size_error.push((ap - ag).abs() / ag.max(1.0));
    }
    Ok((records, size_error))
}

type RunResult = (Vec<ItemOutcome>, Vec<Failure>);

fn run_once(
    plan: &BenchPlan,
    items: &[DatasetItem],
    split: &Split,
    run: usize,
) -> Result<RunResult> {
    let bounds = bounds_for(plan, items, split)?;
    let jobs: Vec<(usize, &[SizeBounds])> = split
        .val
        .iter()
        .copied()
        .zip(bounds.iter().map(Vec::as_slice))
        .collect();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (config, loss) in plan.losses.iter().enumerate() {
        let cfg = RefineConfig {
            loss: *loss,
            ..plan.refine.clone()
        };
        let results = plan
            .execution
            .map(&jobs, |&(i, b)| evaluate_item(plan, &items[i], b, &cfg));
        for (&(i, _), result) in jobs.iter().zip(results) {
            match result {
                Ok((records, size_error)) => outcomes.push(ItemOutcome {
                    run,
                    config,
                    item: items[i].id,
                    records,
                    size_error,
                    true_size: items[i].true_sizes(),
                }),
                Err(e) => failures.push(Failure {
                    run,
                    config,
                    item: items[i].id,
                    message: e.to_string(),
                }),
            }
        }
    }
    Ok((outcomes, failures))
}

/// Generates the dataset, draws the splits and refines every validation
/// item. Refinement errors are collected, not propagated.
pub fn execute(plan: &BenchPlan) -> Result<RunReport> {
    plan.validate()?;
    let items = generate(&plan.dataset, plan.items)?;
    let splits = (0..plan.runs)
        .map(|r| split(items.len(), plan.split, mix_seed(plan.seed, r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let per_run: Vec<Result<RunResult>> = if plan.parallel_runs {
        plan.execution
            .map_range(plan.runs, |r| run_once(plan, &items, &splits[r], r))
    } else {
        (0..plan.runs)
            .map(|r| run_once(plan, &items, &splits[r], r))
            .collect()
    };
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in per_run {
        let (o, f) = r?;
        outcomes.extend(o);
        failures.extend(f);
    }
    let structures = plan
        .dataset
        .family
        .structure_names()
        .iter()
        .map(|s| s.to_string())
        .collect();
    Ok(RunReport {
        structures,
        configs: plan.losses.iter().map(|l| l.name()).collect(),
        runs: plan.runs,
        pixels: plan.dataset.domain.len(),
        splits,
        outcomes,
        failures,
    })
}

/// [`execute`] followed by writing the report files when the plan names an
/// output directory.
pub fn run_bench(plan: &BenchPlan) -> Result<RunReport> {
    let report = execute(plan)?;
    if let Some(dir) = &plan.output {
        report.write_dir(dir)?;
    }
    Ok(report)
}
