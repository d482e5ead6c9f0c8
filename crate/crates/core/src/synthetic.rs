//! Synthetic paired embeddings with a planted shared latent.
//!
//! Each protein draws `z ~ N(0, I)`; the graph embedding is `A z + σ ε` and
//! the text embedding `B z + σ ε'` for fixed Gaussian maps `A`, `B`.

use rand_distr::{Distribution, StandardNormal};

use crate::embedding::{EmbeddingSet, Modality};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mixing {
    /// Entries of `A`, `B` are `N(0, 1/latent_dim)`.
    Random,
    /// `A = B = I`; requires both dims to equal the latent dim.
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub latent_dim: usize,
    pub graph_dim: usize,
    pub text_dim: usize,
    pub noise: f64,
    pub seed: u64,
    pub mixing: Mixing,
}

impl SyntheticSpec {
    /// The 1000-protein, latent-64, 128/256-dim, σ = 0.1 fixture.
    pub fn reference(seed: u64) -> Self {
        Self {
            n: 1000,
            latent_dim: 64,
            graph_dim: 128,
            text_dim: 256,
            noise: 0.1,
            seed,
            mixing: Mixing::Random,
        }
    }
}

pub fn synthetic_id(i: usize) -> String {
    format!("SYN{:06}", i + 1)
}

fn normal(rng: &mut SplitMix64) -> f64 {
    StandardNormal.sample(rng)
}

fn random_map(rng: &mut SplitMix64, rows: usize, cols: usize) -> Vec<f64> {
    let scale = 1.0 / (cols as f64).sqrt();
    (0..rows * cols).map(|_| normal(rng) * scale).collect()
}

fn apply(map: Option<&[f64]>, rows: usize, z: &[f64]) -> Vec<f64> {
    match map {
        Some(m) => m
            .chunks_exact(z.len())
            .take(rows)
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect(),
        None => z.to_vec(),
    }
}

/// Graph and text sets sharing one latent per protein.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(EmbeddingSet, EmbeddingSet)> {
    if spec.latent_dim < 2 || spec.graph_dim < 2 || spec.text_dim < 2 {
        return Err(Error::BadDims(format!(
            "latent {}, graph {}, text {}: all must be at least 2",
            spec.latent_dim, spec.graph_dim, spec.text_dim
        )));
    }
    if spec.mixing == Mixing::Identity
        && (spec.graph_dim != spec.latent_dim || spec.text_dim != spec.latent_dim)
    {
        return Err(Error::BadDims("identity mixing needs graph = text = latent dim".into()));
    }
    if !(spec.noise >= 0.0) || !spec.noise.is_finite() {
        return Err(Error::BadDims(format!("noise {} must be non-negative", spec.noise)));
    }

    let mut rng = SplitMix64::new(spec.seed);
    let (a, b) = match spec.mixing {
        Mixing::Random => (
            Some(random_map(&mut rng, spec.graph_dim, spec.latent_dim)),
            Some(random_map(&mut rng, spec.text_dim, spec.latent_dim)),
        ),
        Mixing::Identity => (None, None),
    };

    let mut graph = EmbeddingSet::new("synthetic-graph", Modality::Graph, spec.graph_dim)?;
    let mut text = EmbeddingSet::new("synthetic-text", Modality::Text, spec.text_dim)?;
    for i in 0..spec.n {
        let z: Vec<f64> = (0..spec.latent_dim).map(|_| normal(&mut rng)).collect();
        let g: Vec<f32> = apply(a.as_deref(), spec.graph_dim, &z)
            .into_iter()
            .map(|v| (v + spec.noise * normal(&mut rng)) as f32)
            .collect();
        let t: Vec<f32> = apply(b.as_deref(), spec.text_dim, &z)
            .into_iter()
            .map(|v| (v + spec.noise * normal(&mut rng)) as f32)
            .collect();
        graph.push(synthetic_id(i), g)?;
        text.push(synthetic_id(i), t)?;
    }
    Ok((graph, text))
}

fn gaussian_into(rng: &mut SplitMix64, n: usize, dim: usize, modality: Modality) -> Result<EmbeddingSet> {
    let mut set = EmbeddingSet::new(format!("gaussian-{modality}"), modality, dim)?;
    for i in 0..n {
        let v = (0..dim).map(|_| normal(rng) as f32).collect();
        set.push(synthetic_id(i), v)?;
    }
    Ok(set)
}

/// `n` vectors with i.i.d. standard normal entries and no shared structure.
pub fn gaussian_set(n: usize, dim: usize, modality: Modality, seed: u64) -> Result<EmbeddingSet> {
    gaussian_into(&mut SplitMix64::new(seed), n, dim, modality)
}

/// Unrelated graph and text sets drawn from one stream: all graph vectors
/// first, then all text vectors.
pub fn gaussian_pair(n: usize, graph_dim: usize, text_dim: usize, seed: u64) -> Result<(EmbeddingSet, EmbeddingSet)> {
    let mut rng = SplitMix64::new(seed);
    let graph = gaussian_into(&mut rng, n, graph_dim, Modality::Graph)?;
    let text = gaussian_into(&mut rng, n, text_dim, Modality::Text)?;
    Ok((graph, text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_without_noise_matches() {
        let spec = SyntheticSpec {
            n: 5,
            latent_dim: 4,
            graph_dim: 4,
            text_dim: 4,
            noise: 0.0,
            seed: 3,
            mixing: Mixing::Identity,
        };
        let (g, t) = gen_synthetic(&spec).unwrap();
        for ((gi, gv), (ti, tv)) in g.iter().zip(t.iter()) {
            assert_eq!(gi, ti);
            assert_eq!(gv, tv);
        }
        assert_eq!(g.ids()[0], "SYN000001");
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec {
            n: 20,
            ..SyntheticSpec::reference(11)
        };
        let (g1, t1) = gen_synthetic(&spec).unwrap();
        let (g2, t2) = gen_synthetic(&spec).unwrap();
        assert_eq!(g1.to_emb1_bytes(), g2.to_emb1_bytes());
        assert_eq!(t1.to_emb1_bytes(), t2.to_emb1_bytes());
    }

    #[test]
    fn bad_dims() {
        let mut spec = SyntheticSpec::reference(1);
        spec.latent_dim = 1;
        assert!(matches!(gen_synthetic(&spec), Err(Error::BadDims(_))));
        let mut spec = SyntheticSpec::reference(1);
        spec.mixing = Mixing::Identity;
        assert!(matches!(gen_synthetic(&spec), Err(Error::BadDims(_))));
    }
}
