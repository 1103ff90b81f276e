use serde::{Deserialize, Serialize};

use super::augment::AugmentConfig;
use crate::{Error, Result};

pub const MOMENTUM: f64 = 0.9;
pub const POLY_POWER: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `base_lr` until `step_decay_epoch`, then `base_lr / 10`.
    StepDecay,
    /// `base_lr * (1 - progress)^0.9` over all steps.
    Polynomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub schedule: Schedule,
    pub step_decay_epoch: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 8,
            base_lr: 0.01,
            schedule: Schedule::StepDecay,
            step_decay_epoch: 7,
            momentum: MOMENTUM,
            weight_decay: 1e-4,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Full-scale pre-training recipe: 0.01, divided by 10 at epoch 20, stopped at 30.
    pub fn pretrain_recipe() -> Self {
        Self {
            epochs: 30,
            base_lr: 0.01,
            schedule: Schedule::StepDecay,
            step_decay_epoch: 20,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.base_lr.is_finite() && self.base_lr >= 0.0) {
            return Err(Error::Config(format!("base_lr must be >= 0, got {}", self.base_lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) || self.weight_decay.is_nan() || self.weight_decay < 0.0 {
            return Err(Error::Config(
                "momentum must lie in [0, 1) and weight_decay be >= 0".into(),
            ));
        }
        self.augment.validate()
    }
}

/// Learning rate for a step `step_fraction` of the way through `epoch`.
pub fn lr_at(config: &TrainConfig, epoch: usize, step_fraction: f64) -> f64 {
    debug_assert!(epoch < config.epochs);
    match config.schedule {
        Schedule::StepDecay => {
            if epoch < config.step_decay_epoch {
                config.base_lr
            } else {
                config.base_lr / 10.0
            }
        }
        Schedule::Polynomial => {
            let progress = ((epoch as f64 + step_fraction) / config.epochs as f64).clamp(0.0, 1.0);
            config.base_lr * (1.0 - progress).powf(POLY_POWER)
        }
    }
}

/// `{5, 2, 1} x 10^-n` for each `n` in `decades`, ascending.
pub fn lr_grid(decades: std::ops::RangeInclusive<i32>) -> Vec<f64> {
    let mut grid: Vec<f64> = decades
        .flat_map(|n| [5.0, 2.0, 1.0].map(|m| m / 10f64.powi(n)))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_decay_drops_tenfold_at_epoch_20() {
        let cfg = TrainConfig::pretrain_recipe();
        assert_eq!(lr_at(&cfg, 19, 0.99), 0.01);
        assert_eq!(lr_at(&cfg, 20, 0.0), 0.001);
    }

    #[test]
    fn polynomial_endpoints() {
        let cfg = TrainConfig {
            schedule: Schedule::Polynomial,
            epochs: 4,
            base_lr: 0.02,
            ..Default::default()
        };
        assert_eq!(lr_at(&cfg, 0, 0.0), 0.02);
        assert_eq!(lr_at(&cfg, 3, 1.0), 0.0);
        assert!((lr_at(&cfg, 2, 0.0) - 0.02 * 0.5f64.powf(0.9)).abs() < 1e-15);
    }

    #[test]
    fn grid_values() {
        assert_eq!(lr_grid(2..=3), vec![0.001, 0.002, 0.005, 0.01, 0.02, 0.05]);
    }

    #[test]
    fn invalid_configs() {
        assert!(TrainConfig {
            epochs: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            base_lr: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
