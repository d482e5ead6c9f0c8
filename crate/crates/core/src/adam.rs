//! Bias-corrected Adam without weight decay.

use crate::error::{Error, Result};
use crate::head::{HeadGradients, ProjectionHead};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moments and step count for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "adam: {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
    Ok(())
}

/// Separate Adam state for every weight matrix and bias vector of a head.
#[derive(Debug, Clone)]
pub struct HeadOptimizer {
    cfg: AdamConfig,
    weights: Vec<AdamState>,
    biases: Vec<AdamState>,
}

impl HeadOptimizer {
    pub fn new(head: &ProjectionHead, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            weights: head.layers.iter().map(|l| AdamState::new(l.weights.len())).collect(),
            biases: head.layers.iter().map(|l| AdamState::new(l.bias.len())).collect(),
        }
    }

    pub fn step(&mut self, head: &mut ProjectionHead, grads: &HeadGradients) -> Result<()> {
        head.check_gradients_shape(grads)?;
        for (k, (layer, g)) in head.layers.iter_mut().zip(&grads.layers).enumerate() {
            adam_step(&mut layer.weights, &g.weights, &mut self.weights[k], &self.cfg)?;
            adam_step(&mut layer.bias, &g.bias, &mut self.biases[k], &self.cfg)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![0.5, -1.5];
        let mut s = AdamState::new(2);
        adam_step(&mut p, &[0.0, 0.0], &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p, vec![0.5, -1.5]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::with_lr(1e-3);
        let g = [0.3, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        let mut s = AdamState::new(3);
        adam_step(&mut p, &g, &mut s, &cfg).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            // m̂ = g and v̂ = g², so the step is lr·g/(|g| + eps).
            let expected = -1e-3 * gi / (gi.abs() + 1e-8);
            assert!((pi - expected).abs() < 1e-15, "{pi} vs {expected}");
            assert!((pi.abs() - 1e-3).abs() < 1e-7);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0; 2];
        let mut s = AdamState::new(2);
        assert!(adam_step(&mut p, &[1.0], &mut s, &AdamConfig::default()).is_err());
    }
}
