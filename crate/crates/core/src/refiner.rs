//! Gradient descent on a per-pixel logit field under a composite loss.
//!
//! One foreground class uses a logistic output; `C > 1` channels use a
//! softmax whose channel 0 is background and channels `1..C` are the
//! foreground classes the losses see.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{threshold, BinaryMask, GridDomain, MultiClassStack, ScalarGrid};
use crate::losses::{lambda_schedule, ClassTarget, LossConfig, Objective, ScheduleState};
use crate::metrics::dice_score;

/// Real-valued logits per pixel per channel, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LogitField {
    domain: GridDomain,
    channels: usize,
    values: Vec<f64>,
}

impl LogitField {
    pub fn new(domain: GridDomain, channels: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::param("a logit field needs at least one channel"));
        }
        if values.len() != channels * domain.len() {
            return Err(Error::LengthMismatch {
                expected: channels * domain.len(),
                actual: values.len(),
            });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteValue { index, value });
        }
        Ok(Self {
            domain,
            channels,
            values,
        })
    }

    pub fn zeros(domain: GridDomain, channels: usize) -> Result<Self> {
        Self::new(domain, channels, vec![0.0; channels * domain.len()])
    }

    /// Stacks per-channel grids.
    pub fn from_layers(layers: &[ScalarGrid]) -> Result<Self> {
        let stack = MultiClassStack::new(layers.to_vec())?;
        let values = stack
            .layers()
            .iter()
            .flat_map(|l| l.values().iter().copied())
            .collect();
        Self::new(stack.domain(), stack.classes(), values)
    }

    pub fn domain(&self) -> GridDomain {
        self.domain
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of foreground classes the field predicts.
    pub fn foreground_classes(&self) -> usize {
        if self.channels == 1 {
            1
        } else {
            self.channels - 1
        }
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.domain.len();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn layers(&self) -> Vec<ScalarGrid> {
        (0..self.channels)
            .map(|c| ScalarGrid::from_vec_unchecked(self.domain, self.channel(c).to_vec()))
            .collect()
    }
}

/// Output of [`predict`].
#[derive(Clone, Debug, PartialEq)]
pub enum Prediction {
    Binary(ScalarGrid),
    /// All channels, background first.
    MultiClass(MultiClassStack<ScalarGrid>),
}

impl Prediction {
    /// Probability maps of the foreground classes.
    pub fn foreground(&self) -> Vec<ScalarGrid> {
        match self {
            Prediction::Binary(p) => vec![p.clone()],
            Prediction::MultiClass(s) => s.layers()[1..].to_vec(),
        }
    }

    /// Hard masks: threshold at 0.5 for one class, argmax for several.
    pub fn masks(&self) -> Vec<BinaryMask> {
        match self {
            Prediction::Binary(p) => vec![threshold(p, 0.5).expect("probabilities are in [0, 1]")],
            Prediction::MultiClass(s) => {
                let d = s.domain();
                let winner: Vec<usize> = (0..d.len())
                    .map(|i| {
                        let mut best = 0;
                        for c in 1..s.classes() {
                            if s.layer(c).values()[i] > s.layer(best).values()[i] {
                                best = c;
                            }
                        }
                        best
                    })
                    .collect();
                (1..s.classes())
                    .map(|c| {
                        let values = winner.iter().map(|&w| u8::from(w == c)).collect();
                        BinaryMask::new(d, values).expect("binary by construction")
                    })
                    .collect()
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic transform for one channel, softmax across channels otherwise.
pub fn predict(logits: &LogitField) -> Prediction {
    let d = logits.domain;
    if logits.channels == 1 {
        let p = logits.values.iter().map(|&z| logistic(z)).collect();
        return Prediction::Binary(ScalarGrid::from_vec_unchecked(d, p));
    }
    let n = d.len();
    let mut out = vec![vec![0.0; n]; logits.channels];
    for i in 0..n {
        let max = (0..logits.channels)
            .map(|c| logits.values[c * n + i])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (c, layer) in out.iter_mut().enumerate() {
            let e = (logits.values[c * n + i] - max).exp();
            layer[i] = e;
            total += e;
        }
        for layer in out.iter_mut() {
            layer[i] /= total;
        }
    }
    let layers = out
        .into_iter()
        .map(|v| ScalarGrid::from_vec_unchecked(d, v))
        .collect();
    Prediction::MultiClass(MultiClassStack::new(layers).expect("layers share a domain"))
}

/// Chains a gradient with respect to logistic probabilities back to the
/// logits: `g * p * (1 - p)`.
pub fn logistic_chain(grad_wrt_pred: &ScalarGrid, pred: &ScalarGrid) -> Result<ScalarGrid> {
    grad_wrt_pred.domain().ensure_same(&pred.domain())?;
    pred.check_unit_range()?;
    let g = grad_wrt_pred
        .values()
        .iter()
        .zip(pred.values())
        .map(|(g, p)| g * p * (1.0 - p))
        .collect();
    ScalarGrid::new(pred.domain(), g)
}

/// Softmax Jacobian per pixel: `dz_c = p_c (g_c - sum_j p_j g_j)`.
/// `grads[c]` is the gradient for channel `c` (background included).
pub fn softmax_chain(
    grads: &[ScalarGrid],
    probs: &MultiClassStack<ScalarGrid>,
) -> Result<Vec<ScalarGrid>> {
    if grads.len() != probs.classes() {
        return Err(Error::param("one gradient per softmax channel required"));
    }
    let d = probs.domain();
    for g in grads {
        d.ensure_same(&g.domain())?;
    }
    let n = d.len();
    let mut out = vec![vec![0.0; n]; grads.len()];
    for i in 0..n {
        let mean: f64 = (0..grads.len())
            .map(|c| probs.layer(c).values()[i] * grads[c].values()[i])
            .sum();
        for (c, layer) in out.iter_mut().enumerate() {
            layer[i] = probs.layer(c).values()[i] * (grads[c].values()[i] - mean);
        }
    }
    out.into_iter().map(|v| ScalarGrid::new(d, v)).collect()
}

/// Optimization settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RefineConfig {
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub learning_rate: f64,
    /// Epochs without validation improvement before the rate is halved.
    pub patience: usize,
    pub lr_factor: f64,
    /// Minimum absolute Dice gain that counts as an improvement.
    pub min_improvement: f64,
    pub loss: LossConfig,
    pub schedule: ScheduleState,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            steps_per_epoch: 1,
            learning_rate: 1e-3,
            patience: 20,
            lr_factor: 0.5,
            min_improvement: 1e-4,
            loss: LossConfig::dice(),
            schedule: ScheduleState::default(),
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_epoch == 0 {
            return Err(Error::param("steps per epoch must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if self.patience == 0 {
            return Err(Error::param("patience must be at least 1"));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor <= 1.0) {
            return Err(Error::param("learning-rate factor must be in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda: f64,
    /// Mean composite loss over the epoch's steps.
    pub loss: f64,
    /// Dice of the hard prediction after the epoch.
    pub val_dice: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<EpochRecord>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,lambda,loss,val_dice,lr")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.6},{:.9},{:.6},{:.9}",
                r.epoch, r.lambda, r.loss, r.val_dice, r.lr
            )?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(f)
    }
}

/// Mean hard Dice across foreground classes.
pub fn validation_dice(pred: &Prediction, targets: &[ClassTarget]) -> Result<f64> {
    let masks = pred.masks();
    let mut total = 0.0;
    for (m, t) in masks.iter().zip(targets) {
        total += dice_score(m, t.mask())?;
    }
    Ok(total / targets.len() as f64)
}

/// Composite loss and its gradient with respect to the logits.
pub fn loss_and_logit_gradient(
    logits: &LogitField,
    objective: &Objective,
    lambda: f64,
) -> Result<(f64, Prediction, Vec<f64>)> {
    let pred = predict(logits);
    let (value, grads) = objective.evaluate(&pred.foreground(), lambda)?;
    let chained: Vec<ScalarGrid> = match &pred {
        Prediction::Binary(p) => vec![logistic_chain(&grads[0], p)?],
        Prediction::MultiClass(stack) => {
            let mut all = Vec::with_capacity(stack.classes());
            all.push(ScalarGrid::zeros(stack.domain()));
            all.extend(grads);
            softmax_chain(&all, stack)?
        }
    };
    let flat = chained.into_iter().flat_map(|g| g.into_values()).collect();
    Ok((value, pred, flat))
}

/// Runs the optimization and returns the final prediction with the
/// per-epoch trajectory. Deterministic: no randomness is involved.
pub fn refine(
    init: &LogitField,
    targets: &[ClassTarget],
    cfg: &RefineConfig,
) -> Result<(Prediction, Trajectory)> {
    cfg.validate()?;
    if init.foreground_classes() != targets.len() {
        return Err(Error::param(format!(
            "logits predict {} classes but {} targets were given",
            init.foreground_classes(),
            targets.len()
        )));
    }
    for t in targets {
        init.domain.ensure_same(&t.mask().domain())?;
    }
    let objective = Objective::new(cfg.loss, targets.to_vec())?;
    let name = cfg.loss.name();

    let mut logits = init.clone();
    let mut trajectory = Trajectory::default();
    let mut lr = cfg.learning_rate;
    let mut best = f64::NEG_INFINITY;
    let mut age = 0;

    for epoch in 0..cfg.epochs {
        let lambda = lambda_schedule(&cfg.schedule.at_epoch(epoch));
        let mut loss_sum = 0.0;
        for _ in 0..cfg.steps_per_epoch {
            let (value, _, grad) =
                loss_and_logit_gradient(&logits, &objective, lambda).map_err(|e| match e {
                    Error::InvalidParameter(_) | Error::NonFiniteValue { .. } => {
                        Error::NonFiniteLoss {
                            loss: name.clone(),
                            what: "loss or gradient",
                            epoch,
                        }
                    }
                    other => other,
                })?;
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    loss: name,
                    what: "loss or gradient",
                    epoch,
                });
            }
            loss_sum += value;
            for (z, g) in logits.values.iter_mut().zip(&grad) {
                *z -= lr * g;
            }
            if logits.values.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    loss: name,
                    what: "logit update",
                    epoch,
                });
            }
        }
        let val_dice = validation_dice(&predict(&logits), objective.targets())?;
        trajectory.records.push(EpochRecord {
            epoch,
            lambda,
            loss: loss_sum / cfg.steps_per_epoch as f64,
            val_dice,
            lr,
        });
        if val_dice > best + cfg.min_improvement {
            best = val_dice;
            age = 0;
        } else {
            age += 1;
            if age >= cfg.patience {
                lr *= cfg.lr_factor;
                age = 0;
            }
        }
    }
    Ok((predict(&logits), trajectory))
}
