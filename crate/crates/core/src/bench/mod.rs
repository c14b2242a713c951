//! Synthetic benchmark harness: datasets, Monte-Carlo splits, execution
//! across loss configurations, and report files.

mod plan;
mod report;
mod run;
mod split;
pub mod synthetic;

pub use plan::{BenchPlan, LossOptions};
pub use report::Metric;
pub use run::{execute, run_bench, Failure, ItemOutcome, RunReport};
pub use split::{split, val_overlap, Split};
pub use synthetic::{generate, DatasetItem, Family, SyntheticSpec};

/// Where the size loss gets its band from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SizeBoundsMode {
    /// `(1 - margin, 1 + margin)` times each item's own true size.
    PerItem { margin: f64 },
    /// The (min, max) of true sizes over the training split, shared by all
    /// validation items.
    DatasetWide,
}

impl Default for SizeBoundsMode {
    fn default() -> Self {
        SizeBoundsMode::PerItem {
            margin: synthetic::DEFAULT_SIZE_MARGIN,
        }
    }
}
