//! Composite objective over one or more foreground classes.

use std::fmt;
use std::str::FromStr;

use super::{
    boundary_loss, cldice_loss_with_skeleton, composite, dice_loss, hausdorff_loss_with_distance,
    size_loss, LossEval, SizeBounds, DEFAULT_SMOOTHING,
};
use crate::error::{Error, Result};
use crate::grid::{BinaryMask, ScalarGrid};
use crate::transforms::{
    opposite_class_distance, signed_distance, soft_skeleton, SignedDistanceMap,
};

/// The prior term mixed with Dice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Prior {
    Boundary { normalize: bool },
    Hausdorff,
    Size,
    ClDice { iterations: usize },
}

impl Prior {
    pub fn name(&self) -> &'static str {
        match self {
            Prior::Boundary { .. } => "boundary",
            Prior::Hausdorff => "hausdorff",
            Prior::Size => "size",
            Prior::ClDice { .. } => "cldice",
        }
    }
}

/// Which loss to optimize: Dice alone or Dice plus one prior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossConfig {
    pub prior: Option<Prior>,
    pub smoothing: f64,
}

impl LossConfig {
    pub fn dice() -> Self {
        Self {
            prior: None,
            smoothing: DEFAULT_SMOOTHING,
        }
    }

    pub fn with_prior(prior: Prior) -> Self {
        Self {
            prior: Some(prior),
            smoothing: DEFAULT_SMOOTHING,
        }
    }

    pub fn name(&self) -> String {
        match self.prior {
            None => "dice".to_owned(),
            Some(p) => format!("dice+{}", p.name()),
        }
    }
}

impl fmt::Display for LossConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses `dice`, `size`, `dice+size`, `boundary`, `hausdorff`, `cldice`.
/// Prior parameters take their defaults; callers override them afterwards.
impl FromStr for LossConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.trim().to_ascii_lowercase();
        let prior = name.strip_prefix("dice+").unwrap_or(&name);
        let prior = match prior {
            "dice" => return Ok(LossConfig::dice()),
            "boundary" => Prior::Boundary { normalize: true },
            "hausdorff" => Prior::Hausdorff,
            "size" => Prior::Size,
            "cldice" => Prior::ClDice {
                iterations: crate::transforms::DEFAULT_SKELETON_ITERATIONS,
            },
            other => return Err(Error::param(format!("unknown loss {other:?}"))),
        };
        Ok(LossConfig::with_prior(prior))
    }
}

/// Ground truth for one class plus everything the losses precompute from it.
#[derive(Clone, Debug)]
pub struct ClassTarget {
    mask: BinaryMask,
    phi: SignedDistanceMap,
    distance: ScalarGrid,
    skeleton: Option<ScalarGrid>,
    bounds: Option<SizeBounds>,
}

impl ClassTarget {
    pub fn new(mask: BinaryMask, bounds: Option<SizeBounds>) -> Self {
        let phi = signed_distance(&mask);
        let distance = opposite_class_distance(&mask);
        Self {
            mask,
            phi,
            distance,
            skeleton: None,
            bounds,
        }
    }

    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    pub fn bounds(&self) -> Option<SizeBounds> {
        self.bounds
    }
}

/// A loss configuration bound to its per-class targets.
#[derive(Clone, Debug)]
pub struct Objective {
    config: LossConfig,
    targets: Vec<ClassTarget>,
}

impl Objective {
    pub fn new(config: LossConfig, mut targets: Vec<ClassTarget>) -> Result<Self> {
        let first = targets
            .first()
            .ok_or_else(|| Error::param("an objective needs at least one class"))?;
        let domain = first.mask.domain();
        for t in &targets {
            domain.ensure_same(&t.mask.domain())?;
        }
        match config.prior {
            Some(Prior::Size) if targets.iter().any(|t| t.bounds.is_none()) => {
                return Err(Error::param("the size prior needs bounds for every class"));
            }
            Some(Prior::ClDice { iterations }) => {
                for t in &mut targets {
                    t.skeleton = Some(soft_skeleton(&t.mask.to_scalar(), iterations)?);
                }
            }
            _ => {}
        }
        Ok(Self { config, targets })
    }

    pub fn config(&self) -> &LossConfig {
        &self.config
    }

    pub fn targets(&self) -> &[ClassTarget] {
        &self.targets
    }

    pub fn classes(&self) -> usize {
        self.targets.len()
    }

    fn prior_eval(&self, prior: Prior, pred: &ScalarGrid, t: &ClassTarget) -> Result<LossEval> {
        match prior {
            Prior::Boundary { normalize } => boundary_loss(pred, &t.phi, normalize),
            Prior::Hausdorff => hausdorff_loss_with_distance(pred, &t.mask, &t.distance),
            Prior::Size => size_loss(pred, t.bounds.expect("checked at construction")),
            Prior::ClDice { iterations } => cldice_loss_with_skeleton(
                pred,
                &t.mask,
                t.skeleton.as_ref().expect("computed at construction"),
                iterations,
                self.config.smoothing,
            ),
        }
    }

    /// Composite loss averaged uniformly over classes. `probs[c]` is the
    /// probability map of class `c`; the returned gradients are with respect
    /// to those maps.
    pub fn evaluate(&self, probs: &[ScalarGrid], lambda: f64) -> Result<(f64, Vec<ScalarGrid>)> {
        if probs.len() != self.targets.len() {
            return Err(Error::param(format!(
                "expected {} class maps, got {}",
                self.targets.len(),
                probs.len()
            )));
        }
        let k = self.targets.len() as f64;
        let mut total = 0.0;
        let mut grads = Vec::with_capacity(probs.len());
        for (pred, t) in probs.iter().zip(&self.targets) {
            let dice = dice_loss(pred, &t.mask, self.config.smoothing)?;
            let eval = match self.config.prior {
                Some(prior) if lambda != 0.0 => {
                    composite(&dice, &self.prior_eval(prior, pred, t)?, lambda)?
                }
                _ => dice,
            };
            total += eval.value;
            grads.push(if k == 1.0 {
                eval.grad
            } else {
                eval.grad.map(|g| g / k)?
            });
        }
        Ok((total / k, grads))
    }
}
