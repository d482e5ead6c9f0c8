//! Modified InfoNCE over in-batch negatives.
//!
//! Similarities are shifted into [0, 1] with `(cos + 1) / 2` and divided by
//! the temperature. Row `i` contrasts graph vector `g_i` against every text
//! vector `t_j` in the batch; the positive sits on the diagonal. Each row's
//! term is multiplied by its weight before the batch mean.

use crate::error::{Error, Result};
use crate::head::dot;

pub const DEFAULT_TEMPERATURE: f64 = 0.2;

/// `(u·v + 1) / 2` for unit vectors.
pub fn shifted_sim(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok((dot(u, v) + 1.0) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    /// Weighted mean of the per-sample terms.
    pub loss: f64,
    /// Unweighted `-log softmax` term of each row's positive.
    pub per_sample: Vec<f64>,
    /// `sim[i][j] = shifted_sim(g_i, t_j)`.
    pub sim: Vec<Vec<f64>>,
}

/// Loss gradients w.r.t. each projected vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradients {
    pub graph: Vec<Vec<f64>>,
    pub text: Vec<Vec<f64>>,
}

fn check_batch(g: &[Vec<f64>], t: &[Vec<f64>], tau: f64, weights: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if t.len() != g.len() || weights.len() != g.len() {
        return Err(Error::ShapeMismatch(format!(
            "batch sizes differ: {} graph, {} text, {} weights",
            g.len(),
            t.len(),
            weights.len()
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("temperature {tau} must be positive")));
    }
    let dim = g[0].len();
    if let Some(v) = g.iter().chain(t).find(|v| v.len() != dim) {
        return Err(Error::DimMismatch {
            expected: dim,
            actual: v.len(),
        });
    }
    Ok(())
}

struct Softmax {
    sim: Vec<Vec<f64>>,
    /// Row-wise softmax of `sim / tau`.
    prob: Vec<Vec<f64>>,
    per_sample: Vec<f64>,
}

fn softmax_rows(g: &[Vec<f64>], t: &[Vec<f64>], tau: f64) -> Softmax {
    let b = g.len();
    let mut sim = Vec::with_capacity(b);
    let mut prob = Vec::with_capacity(b);
    let mut per_sample = Vec::with_capacity(b);
    for (i, gi) in g.iter().enumerate() {
        let row: Vec<f64> = t.iter().map(|tj| (dot(gi, tj) + 1.0) / 2.0).collect();
        let logits: Vec<f64> = row.iter().map(|s| s / tau).collect();
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|a| (a - m).exp()).collect();
        let total: f64 = exps.iter().sum();
        per_sample.push(total.ln() - (logits[i] - m));
        prob.push(exps.iter().map(|e| e / total).collect());
        sim.push(row);
    }
    Softmax {
        sim,
        prob,
        per_sample,
    }
}

/// Weighted batch loss. `g[i]` and `t[i]` must belong to the same protein.
pub fn batch_loss(g: &[Vec<f64>], t: &[Vec<f64>], tau: f64, weights: &[f64]) -> Result<BatchLoss> {
    check_batch(g, t, tau, weights)?;
    let sm = softmax_rows(g, t, tau);
    let loss = weighted_mean(&sm.per_sample, weights);
    Ok(BatchLoss {
        loss,
        per_sample: sm.per_sample,
        sim: sm.sim,
    })
}

fn weighted_mean(terms: &[f64], weights: &[f64]) -> f64 {
    let sum: f64 = terms.iter().zip(weights).map(|(l, w)| w * l).sum();
    sum / terms.len() as f64
}

/// Loss and its exact gradient w.r.t. every projected vector in the batch.
pub fn loss_and_gradients(
    g: &[Vec<f64>],
    t: &[Vec<f64>],
    tau: f64,
    weights: &[f64],
) -> Result<(BatchLoss, LossGradients)> {
    check_batch(g, t, tau, weights)?;
    let b = g.len();
    let dim = g[0].len();
    let sm = softmax_rows(g, t, tau);

    // dL/d(g_i·t_j) = w_i (p_ij - [i=j]) / (2 tau B)
    let scale = 1.0 / (2.0 * tau * b as f64);
    let coeff: Vec<Vec<f64>> = sm
        .prob
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, p)| {
                    let d = if i == j { p - 1.0 } else { *p };
                    weights[i] * d * scale
                })
                .collect()
        })
        .collect();

    let mut grad_g = vec![vec![0.0; dim]; b];
    let mut grad_t = vec![vec![0.0; dim]; b];
    for i in 0..b {
        for j in 0..b {
            let c = coeff[i][j];
            for k in 0..dim {
                grad_g[i][k] += c * t[j][k];
                grad_t[j][k] += c * g[i][k];
            }
        }
    }

    let loss = weighted_mean(&sm.per_sample, weights);
    Ok((
        BatchLoss {
            loss,
            per_sample: sm.per_sample,
            sim: sm.sim,
        },
        LossGradients {
            graph: grad_g,
            text: grad_t,
        },
    ))
}

pub fn loss_gradients(
    g: &[Vec<f64>],
    t: &[Vec<f64>],
    tau: f64,
    weights: &[f64],
) -> Result<LossGradients> {
    Ok(loss_and_gradients(g, t, tau, weights)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(v: &[f64]) -> Vec<f64> {
        let n = dot(v, v).sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn shifted_sim_cases() {
        let u = vec![1.0, 0.0];
        assert_eq!(shifted_sim(&u, &u).unwrap(), 1.0);
        assert_eq!(shifted_sim(&u, &[-1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(shifted_sim(&u, &[0.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(shifted_sim(&u, &[1.0]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn single_sample_has_zero_loss_and_gradient() {
        let g = vec![unit(&[1.0, 2.0])];
        let t = vec![unit(&[-3.0, 1.0])];
        let (l, grads) = loss_and_gradients(&g, &t, 0.2, &[1.0]).unwrap();
        assert_eq!(l.loss, 0.0);
        assert!(grads.graph[0].iter().chain(&grads.text[0]).all(|&v| v == 0.0));
    }

    #[test]
    fn equal_sims_give_ln2() {
        // g_0 ⟂ both t, g_1 ⟂ both t: every shifted sim is 0.5.
        let g = vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]];
        let t = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let l = batch_loss(&g, &t, 0.2, &[1.0, 1.0]).unwrap();
        assert_eq!(l.loss, std::f64::consts::LN_2);
        assert!(l.sim.iter().flatten().all(|&s| s == 0.5));
    }

    #[test]
    fn errors() {
        assert!(matches!(batch_loss(&[], &[], 0.2, &[]), Err(Error::EmptyBatch)));
        let g = vec![vec![1.0, 0.0]];
        assert!(batch_loss(&g, &g, 0.0, &[1.0]).is_err());
        assert!(batch_loss(&g, &g, 0.2, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn weight_scaling_scales_gradients() {
        let g = vec![unit(&[1.0, 0.3]), unit(&[0.2, -1.0]), unit(&[-0.5, 0.5])];
        let t = vec![unit(&[0.9, 0.1]), unit(&[0.0, 1.0]), unit(&[-1.0, 0.2])];
        let a = loss_gradients(&g, &t, 0.2, &[1.0; 3]).unwrap();
        let b = loss_gradients(&g, &t, 0.2, &[4.0; 3]).unwrap();
        for (x, y) in a.graph.iter().flatten().zip(b.graph.iter().flatten()) {
            assert_eq!(4.0 * x, *y);
        }
    }
}
