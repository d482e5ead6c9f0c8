//! Joint contrastive training of the graph-side and text-side heads with
//! validation checkpointing.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, HeadOptimizer};
use crate::embedding::{DatasetSplit, PairedDataset};
use crate::error::{Error, Result};
use crate::head::ProjectionHead;
use crate::loss::{batch_loss, loss_and_gradients, DEFAULT_TEMPERATURE};
use crate::rng::SplitMix64;

pub const DEFAULT_REWEIGHT_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Reweight {
    pub rare_ids: HashSet<String>,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub temperature: f64,
    pub seed: u64,
    pub reweight: Option<Reweight>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 40,
            batch_size: 32,
            temperature: DEFAULT_TEMPERATURE,
            seed: 42,
            reweight: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "temperature {} must be positive",
                self.temperature
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if let Some(r) = &self.reweight {
            if !(r.factor >= 1.0) || !r.factor.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "reweight factor {} must be at least 1",
                    r.factor
                )));
            }
        }
        Ok(())
    }

    fn weight_of(&self, id: &str) -> f64 {
        match &self.reweight {
            Some(r) if r.rare_ids.contains(id) => r.factor,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub checkpointed: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation loss of the heads as passed in, before any update.
    pub initial_val_loss: Option<f64>,
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.epochs
            .iter()
            .filter(|e| e.checkpointed)
            .map(|e| e.val_loss)
            .next_back()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,checkpointed\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_loss, e.val_loss, e.checkpointed
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub graph_head: ProjectionHead,
    pub text_head: ProjectionHead,
    pub history: TrainHistory,
}

struct Samples {
    ids: Vec<String>,
    graph: Vec<Vec<f64>>,
    text: Vec<Vec<f64>>,
}

impl Samples {
    fn load(paired: &PairedDataset, ids: &[String]) -> Result<Self> {
        let mut ids = ids.to_vec();
        ids.sort();
        let graph = ids.iter().map(|id| paired.graph_vector(id)).collect::<Result<_>>()?;
        let text = ids.iter().map(|id| paired.text_vector(id)).collect::<Result<_>>()?;
        Ok(Self { ids, graph, text })
    }

    fn gather(&self, idx: &[usize]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        (
            idx.iter().map(|&i| self.graph[i].clone()).collect(),
            idx.iter().map(|&i| self.text[i].clone()).collect(),
        )
    }
}

fn check_heads(paired: &PairedDataset, g: &ProjectionHead, t: &ProjectionHead) -> Result<()> {
    if g.input_dim() != paired.graph.dim() {
        return Err(Error::ConfigMismatch(format!(
            "graph head takes {} inputs, graph embeddings have {}",
            g.input_dim(),
            paired.graph.dim()
        )));
    }
    if t.input_dim() != paired.text.dim() {
        return Err(Error::ConfigMismatch(format!(
            "text head takes {} inputs, text embeddings have {}",
            t.input_dim(),
            paired.text.dim()
        )));
    }
    if g.output_dim() != t.output_dim() {
        return Err(Error::ConfigMismatch(format!(
            "head outputs differ: graph {} vs text {}",
            g.output_dim(),
            t.output_dim()
        )));
    }
    Ok(())
}

/// Mean loss over sorted-ID chunks of `batch_size` with in-chunk negatives and
/// unit weights, weighted by chunk size.
pub fn validation_loss(
    paired: &PairedDataset,
    ids: &[String],
    g_head: &ProjectionHead,
    t_head: &ProjectionHead,
    batch_size: usize,
    temperature: f64,
) -> Result<f64> {
    let samples = Samples::load(paired, ids)?;
    eval_loss(&samples, g_head, t_head, batch_size, temperature)
}

fn eval_loss(
    samples: &Samples,
    g_head: &ProjectionHead,
    t_head: &ProjectionHead,
    batch_size: usize,
    temperature: f64,
) -> Result<f64> {
    if samples.ids.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let idx: Vec<usize> = (0..samples.ids.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size) {
        let (gx, tx) = samples.gather(chunk);
        let gp: Vec<Vec<f64>> = g_head.forward_batch(&gx)?.into_iter().map(|c| c.output).collect();
        let tp: Vec<Vec<f64>> = t_head.forward_batch(&tx)?.into_iter().map(|c| c.output).collect();
        let l = batch_loss(&gp, &tp, temperature, &vec![1.0; chunk.len()])?;
        total += l.loss * chunk.len() as f64;
    }
    Ok(total / samples.ids.len() as f64)
}

/// Trains both heads on `split.train`, checkpointing on strict improvement of
/// the validation loss, and returns the best checkpoint.
pub fn train_pair(
    paired: &PairedDataset,
    split: &DatasetSplit,
    g_head: ProjectionHead,
    t_head: ProjectionHead,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_heads(paired, &g_head, &t_head)?;
    if cfg.epochs == 0 {
        return Ok(TrainOutcome {
            graph_head: g_head,
            text_head: t_head,
            history: TrainHistory::default(),
        });
    }

    let train = Samples::load(paired, &split.train)?;
    let val = Samples::load(paired, &split.validation)?;
    if train.ids.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let weights: Vec<f64> = train.ids.iter().map(|id| cfg.weight_of(id)).collect();

    let adam = AdamConfig::with_lr(cfg.learning_rate);
    let mut g_opt = HeadOptimizer::new(&g_head, adam);
    let mut t_opt = HeadOptimizer::new(&t_head, adam);
    let mut g_head = g_head;
    let mut t_head = t_head;
    let mut best = (g_head.clone(), t_head.clone());
    let mut best_val = f64::INFINITY;

    let mut history = TrainHistory {
        initial_val_loss: Some(eval_loss(&val, &g_head, &t_head, cfg.batch_size, cfg.temperature)?),
        epochs: Vec::with_capacity(cfg.epochs),
    };

    let mut rng = SplitMix64::new(cfg.seed);
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..train.ids.len()).collect();
        rng.shuffle(&mut order);

        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (gx, tx) = train.gather(batch);
            let batch_weights: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
            let g_cache = g_head.forward_batch(&gx)?;
            let t_cache = t_head.forward_batch(&tx)?;
            let gp: Vec<Vec<f64>> = g_cache.iter().map(|c| c.output.clone()).collect();
            let tp: Vec<Vec<f64>> = t_cache.iter().map(|c| c.output.clone()).collect();
            let (loss, grads) = loss_and_gradients(&gp, &tp, cfg.temperature, &batch_weights)?;
            let g_grads = g_head.backward_cached(&g_cache, &grads.graph)?;
            let t_grads = t_head.backward_cached(&t_cache, &grads.text)?;
            g_opt.step(&mut g_head, &g_grads)?;
            t_opt.step(&mut t_head, &t_grads)?;
            epoch_total += loss.loss * batch.len() as f64;
        }

        let val_loss = eval_loss(&val, &g_head, &t_head, cfg.batch_size, cfg.temperature)?;
        let checkpointed = val_loss < best_val;
        if checkpointed {
            best_val = val_loss;
            best = (g_head.clone(), t_head.clone());
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_total / train.ids.len() as f64,
            val_loss,
            checkpointed,
        });
    }

    Ok(TrainOutcome {
        graph_head: best.0,
        text_head: best.1,
        history,
    })
}
