//! Central finite-difference check of the end-to-end training gradient
//! (inputs → both heads → normalization → contrastive loss).

use serde::Serialize;

use crate::error::Result;
use crate::head::{HeadConfig, HeadGradients, ProjectionHead};
use crate::loss::{batch_loss, loss_and_gradients};
use crate::rng::SplitMix64;

pub const FD_STEP: f64 = 1e-4;

/// Errors are measured relative to `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Instance {
    pub graph_head: ProjectionHead,
    pub text_head: ProjectionHead,
    pub graph_inputs: Vec<Vec<f64>>,
    pub text_inputs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub temperature: f64,
}

impl Instance {
    /// A random small instance: dims in 2..=16, 1–3 layers on the graph side,
    /// batch of 2–4, weights in {1, 2}.
    pub fn random(seed: u64) -> Result<Self> {
        let mut rng = SplitMix64::new(seed);
        let dim = |rng: &mut SplitMix64| 2 + rng.below(15);
        let out = dim(&mut rng);
        let g_in = dim(&mut rng);
        let t_in = dim(&mut rng);
        let hidden: Vec<usize> = (0..rng.below(3)).map(|_| dim(&mut rng)).collect();
        let batch = 2 + rng.below(3);
        let mut graph_head = ProjectionHead::init(&HeadConfig::new(g_in, out, hidden, rng.next()))?;
        let mut text_head = ProjectionHead::init(&HeadConfig::new(t_in, out, vec![], rng.next()))?;
        // Non-zero biases so their gradients are exercised too.
        for layer in graph_head.layers.iter_mut().chain(text_head.layers.iter_mut()) {
            for b in &mut layer.bias {
                *b = rng.symmetric(0.1);
            }
        }
        let graph_inputs = (0..batch)
            .map(|_| (0..g_in).map(|_| rng.symmetric(1.0)).collect())
            .collect();
        let text_inputs = (0..batch)
            .map(|_| (0..t_in).map(|_| rng.symmetric(1.0)).collect())
            .collect();
        let weights = (0..batch).map(|_| if rng.below(2) == 0 { 1.0 } else { 2.0 }).collect();
        Ok(Self {
            graph_head,
            text_head,
            graph_inputs,
            text_inputs,
            weights,
            temperature: 0.2,
        })
    }

    pub fn loss(&self, g_head: &ProjectionHead, t_head: &ProjectionHead) -> Result<f64> {
        let g = self
            .graph_inputs
            .iter()
            .map(|x| g_head.forward(x))
            .collect::<Result<Vec<_>>>()?;
        let t = self
            .text_inputs
            .iter()
            .map(|x| t_head.forward(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(batch_loss(&g, &t, self.temperature, &self.weights)?.loss)
    }

    pub fn analytic(&self) -> Result<(HeadGradients, HeadGradients)> {
        let gc = self.graph_head.forward_batch(&self.graph_inputs)?;
        let tc = self.text_head.forward_batch(&self.text_inputs)?;
        let gp: Vec<Vec<f64>> = gc.iter().map(|c| c.output.clone()).collect();
        let tp: Vec<Vec<f64>> = tc.iter().map(|c| c.output.clone()).collect();
        let (_, up) = loss_and_gradients(&gp, &tp, self.temperature, &self.weights)?;
        Ok((
            self.graph_head.backward_cached(&gc, &up.graph)?,
            self.text_head.backward_cached(&tc, &up.text)?,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckReport {
    pub parameters: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

fn perturbed<F>(head: &ProjectionHead, layer: usize, bias: bool, idx: usize, delta: f64, f: F) -> Result<f64>
where
    F: Fn(&ProjectionHead) -> Result<f64>,
{
    let mut h = head.clone();
    let l = &mut h.layers[layer];
    if bias {
        l.bias[idx] += delta;
    } else {
        l.weights[idx] += delta;
    }
    f(&h)
}

fn compare<F>(head: &ProjectionHead, grads: &HeadGradients, report: &mut CheckReport, f: F) -> Result<()>
where
    F: Fn(&ProjectionHead) -> Result<f64>,
{
    for (k, (layer, g)) in head.layers.iter().zip(&grads.layers).enumerate() {
        let params = (0..layer.weights.len())
            .map(|i| (false, i, g.weights[i]))
            .chain((0..layer.bias.len()).map(|i| (true, i, g.bias[i])));
        for (bias, i, analytic) in params {
            let plus = perturbed(head, k, bias, i, FD_STEP, &f)?;
            let minus = perturbed(head, k, bias, i, -FD_STEP, &f)?;
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let abs = (analytic - numeric).abs();
            let rel = abs / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
            report.parameters += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            report.max_rel_error = report.max_rel_error.max(rel);
        }
    }
    Ok(())
}

/// Compares every parameter gradient of both heads against central differences.
pub fn check(instance: &Instance) -> Result<CheckReport> {
    let (g_grads, t_grads) = instance.analytic()?;
    let mut report = CheckReport {
        parameters: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
    };
    compare(&instance.graph_head, &g_grads, &mut report, |h| {
        instance.loss(h, &instance.text_head)
    })?;
    compare(&instance.text_head, &t_grads, &mut report, |h| {
        instance.loss(&instance.graph_head, h)
    })?;
    Ok(report)
}
