//! Model-pair and per-protein alignment scores.
//!
//! The positive score averages signed cosines of matching pairs; the negative
//! score averages absolute cosines over all ordered pairs of distinct
//! proteins. Both are accumulated in sorted-ID order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::PairedDataset;
use crate::error::{Error, Result};
use crate::head::{dot, ProjectionHead};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub positive: f64,
    pub negative: f64,
    pub alignment: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerProteinScores {
    /// (protein ID, positive-pair cosine), sorted by ID.
    pub entries: Vec<(String, f64)>,
}

impl PerProteinScores {
    pub fn from_entries(mut entries: Vec<(String, f64)>) -> Result<Self> {
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateId(w[0].0.clone()));
        }
        Ok(Self { entries })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, s)| *s).collect()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.entries
            .binary_search_by(|(p, _)| p.as_str().cmp(id))
            .ok()
            .map(|i| self.entries[i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,score\n");
        for (id, s) in &self.entries {
            out.push_str(&format!("{id},{s}\n"));
        }
        out
    }
}

fn sorted_ids(ids: &[String]) -> Vec<String> {
    let mut ids = ids.to_vec();
    ids.sort();
    ids
}

/// Sorted IDs with their projected graph and text vectors.
pub type Projections = (Vec<String>, Vec<Vec<f64>>, Vec<Vec<f64>>);

/// Projects the graph and text embeddings of `ids` (sorted) through the heads.
pub fn project_pairs(
    ids: &[String],
    g_head: &ProjectionHead,
    t_head: &ProjectionHead,
    paired: &PairedDataset,
) -> Result<Projections> {
    if g_head.output_dim() != t_head.output_dim() {
        return Err(Error::ConfigMismatch(format!(
            "head outputs differ: graph {} vs text {}",
            g_head.output_dim(),
            t_head.output_dim()
        )));
    }
    let ids = sorted_ids(ids);
    let g = ids
        .par_iter()
        .map(|id| g_head.forward(&paired.graph_vector(id)?))
        .collect::<Result<Vec<_>>>()?;
    let t = ids
        .par_iter()
        .map(|id| t_head.forward(&paired.text_vector(id)?))
        .collect::<Result<Vec<_>>>()?;
    Ok((ids, g, t))
}

const ROW_BLOCK: usize = 64;

/// Alignment of already-projected unit vectors, `g[i]` paired with `t[i]`.
pub fn alignment_from_projections(g: &[Vec<f64>], t: &[Vec<f64>]) -> Result<AlignmentReport> {
    let n = g.len();
    if t.len() != n {
        return Err(Error::LengthMismatch(n, t.len()));
    }
    if n < 2 {
        return Err(Error::TooFewProteins(n));
    }

    let mut pos = 0.0;
    for (gi, ti) in g.iter().zip(t) {
        pos += dot(gi, ti);
    }

    // Dot products are computed in parallel blocks of rows, but summed in
    // plain (i, j) order so the result does not depend on the thread count.
    let mut neg = 0.0;
    for start in (0..n).step_by(ROW_BLOCK) {
        let rows: Vec<Vec<f64>> = (start..(start + ROW_BLOCK).min(n))
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| dot(&g[i], &t[j]).abs())
                    .collect()
            })
            .collect();
        for v in rows.iter().flatten() {
            neg += v;
        }
    }

    let m = n * (n - 1);
    let positive = pos / n as f64;
    let negative = neg / m as f64;
    Ok(AlignmentReport {
        positive,
        negative,
        alignment: positive - negative,
        n,
        m,
    })
}

pub fn model_pair_score(
    test_ids: &[String],
    g_head: &ProjectionHead,
    t_head: &ProjectionHead,
    paired: &PairedDataset,
) -> Result<AlignmentReport> {
    if test_ids.len() < 2 {
        return Err(Error::TooFewProteins(test_ids.len()));
    }
    let (_, g, t) = project_pairs(test_ids, g_head, t_head, paired)?;
    alignment_from_projections(&g, &t)
}

pub fn per_protein_scores(
    test_ids: &[String],
    g_head: &ProjectionHead,
    t_head: &ProjectionHead,
    paired: &PairedDataset,
) -> Result<PerProteinScores> {
    let (ids, g, t) = project_pairs(test_ids, g_head, t_head, paired)?;
    let entries = ids
        .into_iter()
        .zip(g.iter().zip(&t))
        .map(|(id, (gi, ti))| (id, dot(gi, ti).clamp(-1.0, 1.0)))
        .collect();
    PerProteinScores::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                v
            })
            .collect()
    }

    #[test]
    fn orthonormal_alignment_is_perfect() {
        let e = basis(4, 6);
        let r = alignment_from_projections(&e, &e).unwrap();
        assert_eq!((r.positive, r.negative, r.alignment), (1.0, 0.0, 1.0));
        assert_eq!((r.n, r.m), (4, 12));
    }

    #[test]
    fn collapse_gives_zero() {
        let v = vec![vec![0.6, 0.8]; 5];
        let r = alignment_from_projections(&v, &v).unwrap();
        assert!((r.positive - 1.0).abs() < 1e-15);
        assert!((r.negative - 1.0).abs() < 1e-15);
        assert!(r.alignment.abs() < 1e-15);
    }

    #[test]
    fn three_hand_built_vectors() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let g = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![s, s]];
        let t = vec![vec![s, s], vec![0.0, -1.0], vec![1.0, 0.0]];
        let r = alignment_from_projections(&g, &t).unwrap();
        // positives: s, -1, s ; negatives |g_i·t_j|, j≠i:
        // i=0: 0, 1 ; i=1: s, 0 ; i=2: 1, s
        let pos = (s + -1.0 + s) / 3.0;
        let neg = (0.0 + 1.0 + s + 0.0 + 1.0 + s) / 6.0;
        assert!((r.positive - pos).abs() < 1e-15);
        assert!((r.negative - neg).abs() < 1e-15);
        assert_eq!(r.alignment, r.positive - r.negative);
    }

    #[test]
    fn too_few() {
        let e = basis(1, 2);
        assert!(matches!(
            alignment_from_projections(&e, &e),
            Err(Error::TooFewProteins(1))
        ));
    }

    #[test]
    fn per_protein_lookup() {
        let s = PerProteinScores::from_entries(vec![("B".into(), 0.5), ("A".into(), -0.25)]).unwrap();
        assert_eq!(s.ids().collect::<Vec<_>>(), vec!["A", "B"]);
        assert_eq!(s.get("B"), Some(0.5));
        assert_eq!(s.get("C"), None);
        assert!(PerProteinScores::from_entries(vec![("A".into(), 0.0), ("A".into(), 1.0)]).is_err());
    }
}
