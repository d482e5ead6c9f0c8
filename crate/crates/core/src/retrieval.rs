//! Exact top-k retrieval over projected training proteins and
//! retrieval-augmented input construction.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::PairedDataset;
use crate::error::{Error, Result};
use crate::head::{dot, ProjectionHead};

#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    ids: Vec<String>,
    vectors: Vec<Vec<f64>>,
    dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub id: String,
    pub cosine: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub neighbors: Vec<Neighbor>,
    pub augmented_text: String,
}

/// Higher cosine first, then ascending ID.
fn rank_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.cosine
        .total_cmp(&a.cosine)
        .then_with(|| a.id.cmp(&b.id))
}

impl RetrievalIndex {
    /// Index of unit vectors; entries are kept in sorted-ID order.
    pub fn from_vectors(mut entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyIndex);
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId(w[0].0.clone()));
        }
        let dim = entries[0].1.len();
        if let Some((_, v)) = entries.iter().find(|(_, v)| v.len() != dim) {
            return Err(Error::DimMismatch {
                expected: dim,
                actual: v.len(),
            });
        }
        let (ids, vectors) = entries.into_iter().unzip();
        Ok(Self { ids, vectors, dim })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .zip(&self.vectors)
            .map(|(id, v)| (id.as_str(), v.as_slice()))
    }

    /// Top `k` entries by cosine to `query` (a unit vector). `exclude` drops
    /// one ID from consideration, typically the query protein itself.
    pub fn query_vector(&self, query: &[f64], k: usize, exclude: Option<&str>) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if query.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let mut scored: Vec<Neighbor> = self
            .ids
            .par_iter()
            .zip(self.vectors.par_iter())
            .filter(|(id, _)| Some(id.as_str()) != exclude)
            .map(|(id, v)| Neighbor {
                id: id.clone(),
                // Adding +0.0 turns -0.0 into +0.0, so equal cosines tie.
                cosine: dot(query, v) + 0.0,
            })
            .collect();
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(scored)
    }
}

/// Projects the graph embeddings of `train_ids` into the shared space.
pub fn build_index(
    train_ids: &[String],
    g_head: &ProjectionHead,
    paired: &PairedDataset,
) -> Result<RetrievalIndex> {
    if train_ids.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let entries = train_ids
        .par_iter()
        .map(|id| Ok((id.clone(), g_head.forward(&paired.graph_vector(id)?)?)))
        .collect::<Result<Vec<_>>>()?;
    RetrievalIndex::from_vectors(entries)
}

/// Top-k neighbors of a protein's projected graph embedding, excluding the
/// protein itself.
pub fn query_topk(
    index: &RetrievalIndex,
    query_id: &str,
    g_head: &ProjectionHead,
    paired: &PairedDataset,
    k: usize,
) -> Result<Vec<Neighbor>> {
    let q = g_head.forward(&paired.graph_vector(query_id)?)?;
    index.query_vector(&q, k, Some(query_id))
}

/// Neighbor descriptions in rank order, one per line, a blank line, then the
/// original input.
pub fn augment_input(
    neighbors: &[Neighbor],
    descriptions: &HashMap<String, String>,
    original_input: &str,
) -> Result<String> {
    if neighbors.is_empty() {
        return Ok(original_input.to_owned());
    }
    let mut out = String::new();
    for n in neighbors {
        let d = descriptions
            .get(&n.id)
            .ok_or_else(|| Error::MissingDescription(n.id.clone()))?;
        out.push_str(d);
        out.push('\n');
    }
    out.push('\n');
    out.push_str(original_input);
    Ok(out)
}

pub fn retrieve(
    index: &RetrievalIndex,
    query_id: &str,
    g_head: &ProjectionHead,
    paired: &PairedDataset,
    k: usize,
    descriptions: &HashMap<String, String>,
    original_input: &str,
) -> Result<RetrievalResult> {
    let neighbors = query_topk(index, query_id, g_head, paired, k)?;
    let augmented_text = augment_input(&neighbors, descriptions, original_input)?;
    Ok(RetrievalResult {
        query_id: query_id.to_owned(),
        neighbors,
        augmented_text,
    })
}
