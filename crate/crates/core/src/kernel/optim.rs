//! RMSProp with the squared-gradient average inside the square root
//! together with epsilon.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmsPropConfig {
    pub lr: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl RmsPropConfig {
    /// Desk-scale training default: the classic constants with epsilon 1e-5.
    /// With epsilon 1e-2 inside the root, the small batch-mean gradients of
    /// toy games are scaled by ~10 instead of normalized, and learning stalls.
    pub fn desk() -> Self {
        Self {
            epsilon: 1e-5,
            ..Self::default()
        }
    }
}

impl Default for RmsPropConfig {
    fn default() -> Self {
        Self {
            lr: 2.5e-4,
            decay: 0.95,
            epsilon: 1e-2,
        }
    }
}

/// One elementwise update: `s = decay*s + (1-decay)*g^2; p -= lr*g/sqrt(s+eps)`.
pub fn rmsprop_step(params: &mut [f64], grads: &[f64], state: &mut [f64], cfg: &RmsPropConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.len() {
        return shape_err(format!(
            "rmsprop over {} params, {} grads, {} state entries",
            params.len(),
            grads.len(),
            state.len()
        ));
    }
    for ((p, &g), s) in params.iter_mut().zip(grads).zip(state.iter_mut()) {
        *s = cfg.decay * *s + (1.0 - cfg.decay) * g * g;
        if g != 0.0 {
            *p -= cfg.lr * g / (*s + cfg.epsilon).sqrt();
        }
    }
    Ok(())
}

/// Optimizer state for an ordered list of parameter tensors.
#[derive(Clone, Debug)]
pub struct RmsProp {
    pub config: RmsPropConfig,
    state: Vec<Vec<f64>>,
}

impl RmsProp {
    pub fn new(config: RmsPropConfig) -> Self {
        Self {
            config,
            state: Vec::new(),
        }
    }

    /// Applies one step from each tensor's gradient plane.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.state.is_empty() {
            self.state = params.iter().map(|p| vec![0.0; p.len()]).collect();
        }
        if self.state.len() != params.len() {
            return shape_err("parameter list changed between optimizer steps");
        }
        for (p, s) in params.iter_mut().zip(self.state.iter_mut()) {
            let (values, grads) = p.planes_mut();
            rmsprop_step(values, grads, s, &self.config)?;
        }
        Ok(())
    }
}
