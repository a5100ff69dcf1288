//! Learning-rate schedules: linear warmup followed by constant, cosine
//! annealing, or warmup-stable-decay (WSD).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Constant,
    CosineWarmup,
    Wsd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayShape {
    #[default]
    Linear,
    OneMinusSqrt,
}

fn default_floor_lr() -> f64 {
    1e-5
}

fn default_decay_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub peak_lr: f64,
    pub total_steps: u64,
    #[serde(default)]
    pub warmup_steps: u64,
    /// Absolute floor the decay phases anneal to.
    #[serde(default = "default_floor_lr")]
    pub floor_lr: f64,
    /// WSD only: final fraction of the run spent decaying.
    #[serde(default = "default_decay_fraction")]
    pub decay_fraction: f64,
    #[serde(default)]
    pub decay_shape: DecayShape,
}

impl ScheduleSpec {
    pub fn constant(peak_lr: f64, total_steps: u64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::Constant,
            peak_lr,
            total_steps,
            warmup_steps: 0,
            floor_lr: 0.0,
            decay_fraction: default_decay_fraction(),
            decay_shape: DecayShape::Linear,
        }
    }

    pub fn cosine_warmup(peak_lr: f64, total_steps: u64, warmup_steps: u64) -> Self {
        ScheduleSpec {
            kind: ScheduleKind::CosineWarmup,
            peak_lr,
            total_steps,
            warmup_steps,
            floor_lr: default_floor_lr(),
            decay_fraction: default_decay_fraction(),
            decay_shape: DecayShape::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.warmup_steps > self.total_steps {
            return Err(Error::InvalidConfig(
                "warmup_steps exceeds total_steps".into(),
            ));
        }
        if self.floor_lr > self.peak_lr {
            return Err(Error::InvalidConfig("floor_lr exceeds peak_lr".into()));
        }
        if !(self.peak_lr > 0.0) {
            return Err(Error::InvalidConfig("peak_lr must be positive".into()));
        }
        if self.kind == ScheduleKind::Wsd && !(0.0 < self.decay_fraction && self.decay_fraction < 1.0)
        {
            return Err(Error::InvalidConfig(
                "decay_fraction must be in (0,1)".into(),
            ));
        }
        Ok(())
    }

    /// Learning rate at step t, 0 <= t <= total_steps. Warmup is linear from
    /// 0 to peak over warmup_steps.
    pub fn lr_at(&self, t: u64) -> Result<f64> {
        if t > self.total_steps {
            return Err(Error::ScheduleOutOfRange {
                t,
                total: self.total_steps,
            });
        }
        if t < self.warmup_steps {
            return Ok(self.peak_lr * t as f64 / self.warmup_steps as f64);
        }
        match self.kind {
            ScheduleKind::Constant => Ok(self.peak_lr),
            ScheduleKind::CosineWarmup => {
                let span = (self.total_steps - self.warmup_steps) as f64;
                if span == 0.0 {
                    return Ok(self.peak_lr);
                }
                let progress = (t - self.warmup_steps) as f64 / span;
                let factor = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
                Ok(self.floor_lr + (self.peak_lr - self.floor_lr) * factor)
            }
            ScheduleKind::Wsd => {
                let decay_start = (1.0 - self.decay_fraction) * self.total_steps as f64;
                if (t as f64) < decay_start {
                    return Ok(self.peak_lr);
                }
                let span = self.total_steps as f64 - decay_start;
                if span == 0.0 {
                    return Ok(self.floor_lr);
                }
                let progress = ((t as f64 - decay_start) / span).min(1.0);
                let factor = match self.decay_shape {
                    DecayShape::Linear => 1.0 - progress,
                    DecayShape::OneMinusSqrt => 1.0 - progress.sqrt(),
                };
                Ok(self.floor_lr + (self.peak_lr - self.floor_lr) * factor)
            }
        }
    }
}
