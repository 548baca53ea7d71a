//! Per-epoch hyperparameter schedules (learning rates and loss weights).

use serde::{Deserialize, Serialize};

use crate::error::{JamlocError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScheduleKind {
    Linear,
    CosineAnneal,
    /// Linear warmup from 0 to `start_value` over `warmup_fraction * total`,
    /// then cosine annealing from `start_value` down to `end_value`.
    WarmupThenCosine { warmup_fraction: f64 },
    /// Logistic ramp `start + (end - start) * sigmoid(k * (2 e / total - 1))`.
    SigmoidRamp { steepness: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub start_value: f64,
    pub end_value: f64,
    pub total_epochs: usize,
}

impl ScheduleSpec {
    pub fn linear(start: f64, end: f64, total: usize) -> Self {
        Self {
            kind: ScheduleKind::Linear,
            start_value: start,
            end_value: end,
            total_epochs: total,
        }
    }

    pub fn constant(v: f64, total: usize) -> Self {
        Self::linear(v, v, total)
    }

    pub fn cosine(start: f64, end: f64, total: usize) -> Self {
        Self {
            kind: ScheduleKind::CosineAnneal,
            start_value: start,
            end_value: end,
            total_epochs: total,
        }
    }

    pub fn warmup_cosine(base: f64, warmup_fraction: f64, total: usize) -> Self {
        Self {
            kind: ScheduleKind::WarmupThenCosine { warmup_fraction },
            start_value: base,
            end_value: 0.0,
            total_epochs: total,
        }
    }

    pub fn sigmoid_ramp(start: f64, end: f64, total: usize, steepness: f64) -> Self {
        Self {
            kind: ScheduleKind::SigmoidRamp { steepness },
            start_value: start,
            end_value: end,
            total_epochs: total,
        }
    }

    pub fn value(&self, epoch: usize) -> Result<f64> {
        if epoch > self.total_epochs {
            return Err(JamlocError::Invalid(format!(
                "epoch {epoch} out of schedule range 0..={}",
                self.total_epochs
            )));
        }
        let t = self.total_epochs.max(1) as f64;
        let e = epoch as f64;
        Ok(match self.kind {
            ScheduleKind::Linear => {
                self.start_value + (self.end_value - self.start_value) * e / t
            }
            ScheduleKind::CosineAnneal => {
                self.end_value
                    + (self.start_value - self.end_value)
                        * 0.5
                        * (1.0 + (std::f64::consts::PI * e / t).cos())
            }
            ScheduleKind::WarmupThenCosine { warmup_fraction } => {
                let warm = (warmup_fraction * t).max(1.0);
                if e < warm {
                    self.start_value * e / warm
                } else {
                    let p = (e - warm) / (t - warm).max(1.0);
                    self.end_value
                        + (self.start_value - self.end_value)
                            * 0.5
                            * (1.0 + (std::f64::consts::PI * p).cos())
                }
            }
            ScheduleKind::SigmoidRamp { steepness } => {
                let z = steepness * (2.0 * e / t - 1.0);
                let sig = 1.0 / (1.0 + (-z).exp());
                self.start_value + (self.end_value - self.start_value) * sig
            }
        })
    }
}
