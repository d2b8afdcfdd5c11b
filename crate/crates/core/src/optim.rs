//! Training hyperparameters and the momentum SGD update.

use alloc::format;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Triplet hinge margin.
    pub margin: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_outfits: usize,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 2.0,
            learning_rate: 1e-2,
            momentum: 0.9,
            epochs: 50,
            batch_outfits: 32,
            lr_decay_factor: 0.2,
            lr_decay_every: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::config(format!("{what} out of range: {v}")));
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return bad("margin", self.margin);
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", self.learning_rate);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", self.momentum);
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return bad("lr_decay_factor", self.lr_decay_factor);
        }
        if self.epochs == 0 || self.batch_outfits == 0 || self.lr_decay_every == 0 {
            return Err(Error::config(
                "epochs, batch_outfits and lr_decay_every must be positive",
            ));
        }
        Ok(())
    }

    /// Step decay: `learning_rate * lr_decay_factor ^ floor(epoch / lr_decay_every)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * libm::pow(self.lr_decay_factor, (epoch / self.lr_decay_every) as f64)
    }
}

/// Heavy-ball update: `v = momentum * v + g; p -= lr * v`.
pub fn momentum_step_f32(params: &mut [f32], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    debug_assert_eq!(params.len(), grad.len());
    debug_assert_eq!(params.len(), velocity.len());
    for ((p, &g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p = (*p as f64 - lr * *v) as f32;
    }
}

pub fn momentum_step_f64(params: &mut [f64], grad: &[f64], velocity: &mut [f64], lr: f64, momentum: f64) {
    debug_assert_eq!(params.len(), grad.len());
    for ((p, &g), v) in params.iter_mut().zip(grad).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_decay_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_at(0), 1e-2);
        assert_eq!(c.lr_at(9), 1e-2);
        assert!((c.lr_at(10) - 2e-3).abs() < 1e-15);
        assert!((c.lr_at(20) - 4e-4).abs() < 1e-16);
        assert!((c.lr_at(49) - 1.6e-5).abs() < 1e-17);
    }

    #[test]
    fn validation_rejects_out_of_range() {
        assert!(TrainConfig::default().validate().is_ok());
        let d = TrainConfig::default;
        assert!(TrainConfig { momentum: 1.0, ..d() }.validate().is_err());
        assert!(TrainConfig {
            lr_decay_factor: 0.0,
            ..d()
        }
        .validate()
        .is_err());
        assert!(TrainConfig { epochs: 0, ..d() }.validate().is_err());
        assert!(TrainConfig { margin: -1.0, ..d() }.validate().is_err());
    }

    #[test]
    fn momentum_accumulates() {
        let mut p = [1.0f64];
        let mut v = [0.0];
        momentum_step_f64(&mut p, &[1.0], &mut v, 0.1, 0.9);
        assert!((p[0] - 0.9).abs() < 1e-15);
        momentum_step_f64(&mut p, &[1.0], &mut v, 0.1, 0.9);
        // v = 1.9
        assert!((p[0] - 0.71).abs() < 1e-12);
    }
}
