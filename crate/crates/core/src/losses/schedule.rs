use crate::error::{Error, Result};

/// Epoch-indexed weight of the prior term: starts at `lambda0`, grows by
/// `step` per epoch and saturates at `cap < 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleState {
    pub epoch: usize,
    lambda0: f64,
    step: f64,
    cap: f64,
}

impl Default for ScheduleState {
    fn default() -> Self {
        Self {
            epoch: 0,
            lambda0: 0.01,
            step: 0.01,
            cap: 0.99,
        }
    }
}

impl ScheduleState {
    pub fn new(lambda0: f64, step: f64, cap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&cap) {
            return Err(Error::param(format!("lambda cap {cap} is outside [0, 1)")));
        }
        if !(0.0..=cap).contains(&lambda0) {
            return Err(Error::param(format!(
                "initial lambda {lambda0} is outside [0, cap]"
            )));
        }
        if !(step >= 0.0 && step.is_finite()) {
            return Err(Error::param(format!(
                "lambda step {step} must be non-negative"
            )));
        }
        Ok(Self {
            epoch: 0,
            lambda0,
            step,
            cap,
        })
    }

    /// A schedule that keeps lambda at zero, i.e. Dice only.
    pub fn disabled() -> Self {
        Self {
            epoch: 0,
            lambda0: 0.0,
            step: 0.0,
            cap: 0.0,
        }
    }

    pub fn at_epoch(mut self, epoch: usize) -> Self {
        self.epoch = epoch;
        self
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }
}

/// `min(lambda0 + step * epoch, cap)`.
pub fn lambda_schedule(state: &ScheduleState) -> f64 {
    (state.lambda0 + state.step * state.epoch as f64).min(state.cap)
}
