//! Temperature softmax over Q-values and the KL objective between policies.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Probability vector over the action set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyDistribution {
    probs: Vec<f64>,
}

impl PolicyDistribution {
    /// Validates non-negativity and unit mass (within 1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidArgument(format!("invalid probabilities {probs:?}")));
        }
        let mass: f64 = probs.iter().sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {mass}")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Inverse-CDF draw given one uniform `u` in `[0, 1)`.
    pub fn sample_with(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (a, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        // Rounding left the total just below u; take the last supported action.
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// `pi(a) = exp(q(a)/tau) / sum exp(q(a')/tau)`, max-subtracted.
pub fn softmax_temperature(q: &[f64], tau: f64) -> Result<PolicyDistribution> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    if q.is_empty() {
        return Err(Error::InvalidArgument("no Q-values".into()));
    }
    if q.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite Q-values {q:?}")));
    }
    let m = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q.iter().map(|&x| ((x - m) / tau).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(PolicyDistribution {
        probs: exps.into_iter().map(|e| e / z).collect(),
    })
}

/// `KL(p || q) = sum p ln(p/q)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &PolicyDistribution, q: &PolicyDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return shape_err(format!("KL over {} vs {} actions", p.len(), q.len()));
    }
    Ok(p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(&pa, _)| pa > 0.0)
        .map(|(&pa, &qa)| pa * (pa / qa).ln())
        .sum())
}

/// `KL(target || softmax(logits / tau))` and its gradient with respect to
/// the logits, `(pi_student - target) / tau`.
pub fn kl_to_softmax(target: &PolicyDistribution, logits: &[f64], tau: f64) -> Result<(f64, Vec<f64>)> {
    let student = softmax_temperature(logits, tau)?;
    let loss = kl_divergence(target, &student)?;
    let grad = student
        .probs
        .iter()
        .zip(&target.probs)
        .map(|(s, t)| (s - t) / tau)
        .collect();
    Ok((loss, grad))
}
