//! SGD with momentum and L2 weight decay, plus the step-decay schedule.

use crate::error::{Error, Result};
use crate::numcore::{Matrix, Parameter};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            lr: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-4,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight_decay must be >= 0, got {}", self.weight_decay)));
        }
        Ok(())
    }
}

/// Learning rate divided by `decay_factor` every `decay_every` epochs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub decay_factor: f64,
    pub decay_every: usize,
    pub epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        LrSchedule {
            decay_factor: 10.0,
            decay_every: 30,
            epochs: 65,
        }
    }
}

impl LrSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.decay_factor >= 1.0 && self.decay_factor.is_finite()) {
            return Err(Error::Config(format!("lr_decay_factor must be >= 1, got {}", self.decay_factor)));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("lr_decay_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Rate for zero-based `epoch`.
    pub fn lr_at(&self, base_lr: f64, epoch: usize) -> f64 {
        let drops = (epoch / self.decay_every.max(1)) as i32;
        base_lr / self.decay_factor.powi(drops)
    }
}

/// `v ← μ·v + (g + λ·w)`, `w ← w − lr·v`.
pub fn sgd_step(value: &mut Matrix, grad: &Matrix, velocity: &mut Matrix, lr: f64, momentum: f64, weight_decay: f64) -> Result<()> {
    value.expect_same_shape(grad, "sgd_step")?;
    value.expect_same_shape(velocity, "sgd_step")?;
    for ((w, &g), v) in value
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(velocity.as_mut_slice())
    {
        *v = momentum * *v + (g + weight_decay * *w);
        *w -= lr * *v;
    }
    Ok(())
}

/// Momentum buffers for an ordered list of parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Sgd {
    pub config: SgdConfig,
    velocities: Vec<Matrix>,
}

impl Sgd {
    pub fn new(config: SgdConfig, shapes: &[(usize, usize)]) -> Self {
        Sgd {
            config,
            velocities: shapes.iter().map(|&(r, c)| Matrix::zeros(r, c)).collect(),
        }
    }

    pub fn with_velocities(config: SgdConfig, velocities: Vec<Matrix>) -> Self {
        Sgd { config, velocities }
    }

    pub fn velocities(&self) -> &[Matrix] {
        &self.velocities
    }

    /// Updates every parameter that requires a gradient, using `lr` in place
    /// of the configured base rate.
    pub fn step(&mut self, params: &mut [&mut Parameter], lr: f64) -> Result<()> {
        if params.len() != self.velocities.len() {
            return Err(Error::Input(format!(
                "optimizer tracks {} parameters, got {}",
                self.velocities.len(),
                params.len()
            )));
        }
        for (p, v) in params.iter_mut().zip(&mut self.velocities) {
            if !p.requires_grad {
                continue;
            }
            let Parameter { value, grad, .. } = &mut **p;
            sgd_step(value, grad, v, lr, self.config.momentum, self.config.weight_decay)?;
        }
        Ok(())
    }
}
