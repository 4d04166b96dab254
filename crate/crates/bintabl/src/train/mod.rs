//! Training protocol: schedule, configuration, loop, and the multi-run
//! experiment driver that reports per-run metrics and their median.

pub mod adam;
pub mod loss;
pub mod protocol;

pub use adam::{Adam, Regularizer};
pub use loss::{weighted_cross_entropy, ClassWeights};
pub use protocol::{evaluate, run_protocol, train, EpochRecord, ProtocolResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full experiment configuration. Defaults mirror the published protocol:
/// 80 epochs, learning rate 1e-3 dropping to 1e-4 and 1e-5 at epochs 11
/// and 71, dropout 0.1, 5 runs with the median reported, and one of two
/// weight regularizers (decay 1e-3 or max-norm 10.0; max-norm by default).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// (first epoch, rate) pairs; epochs strictly increasing, rates
    /// strictly decreasing, first entry at epoch 1.
    pub schedule: Vec<(usize, f64)>,
    pub batch_size: usize,
    pub regularizer: Regularizer,
    pub dropout: f64,
    pub horizon: u32,
    pub runs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 80,
            schedule: vec![(1, 1e-3), (11, 1e-4), (71, 1e-5)],
            batch_size: 256,
            regularizer: Regularizer::MaxNorm(10.0),
            dropout: 0.1,
            horizon: 10,
            runs: 5,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::config("runs must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if self.schedule.is_empty() || self.schedule[0].0 != 1 {
            return Err(Error::config("learning-rate schedule must start at epoch 1"));
        }
        for pair in self.schedule.windows(2) {
            let ((e0, r0), (e1, r1)) = (pair[0], pair[1]);
            if e1 <= e0 {
                return Err(Error::config(
                    "schedule epochs must be strictly increasing",
                ));
            }
            if r1 >= r0 {
                return Err(Error::config("schedule rates must be strictly decreasing"));
            }
        }
        for &(_, r) in &self.schedule {
            if r <= 0.0 {
                return Err(Error::config("schedule rates must be positive"));
            }
        }
        Ok(())
    }

    /// Rate in force at a 1-based epoch: the last schedule entry that has
    /// started.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let mut rate = self.schedule[0].1;
        for &(start, r) in &self.schedule {
            if start <= epoch {
                rate = r;
            }
        }
        rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_schedule_values() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(1), 1e-3);
        assert_eq!(cfg.lr_at(10), 1e-3);
        assert_eq!(cfg.lr_at(11), 1e-4);
        assert_eq!(cfg.lr_at(70), 1e-4);
        assert_eq!(cfg.lr_at(71), 1e-5);
        assert_eq!(cfg.lr_at(80), 1e-5);
    }

    #[test]
    fn schedule_must_decrease() {
        let mut cfg = TrainConfig {
            schedule: vec![(1, 1e-4), (11, 1e-3)],
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![(1, 1e-3), (1, 1e-4)];
        assert!(cfg.validate().is_err());
        cfg.schedule = vec![(2, 1e-3)];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
    }
}
