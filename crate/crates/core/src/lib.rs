//! Prior-based segmentation losses (boundary, Hausdorff, size, clDice) with
//! exact gradients, the evaluation metrics used to compare them, and a
//! synthetic benchmark harness that optimizes per-pixel logits under each
//! composite objective.
//!
//! Module map:
//!
//! * [`grid`]: grid types, validation, PGM / PSG1 file I/O
//! * [`transforms`]: distance transforms, components, boundaries, soft skeletons
//! * [`tape`]: reverse-mode differentiation over grid operations
//! * [`losses`]: the loss functions, the composite objective and the lambda schedule
//! * [`metrics`]: Dice score, Hausdorff distance, component-count error
//! * [`refiner`]: gradient descent on a logit field
//! * [`bench`]: synthetic datasets, Monte-Carlo splits, benchmark reports

pub mod bench;
pub mod error;
pub mod grid;
pub mod losses;
pub mod metrics;
pub mod par;
pub mod refiner;
pub mod tape;
pub mod transforms;

pub use error::{Error, Result};
pub use grid::{BinaryMask, GridDomain, MultiClassStack, ScalarGrid};
pub use par::Execution;
