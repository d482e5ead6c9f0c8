//! Projection heads: affine layers with ReLU between them and an L2-normalized
//! output, plus their exact reverse-mode gradients and the PHD1 checkpoint
//! format.
//!
//! PHD1 layout (little-endian):
//!
//! ```text
//! "PHD1" | u16 version (=1) | u8 layer_count
//! layer_count × ( u32 rows | u32 cols | rows×cols f64 row-major | rows f64 bias )
//! ```

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{read_bytes, write_bytes};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const PHD1_MAGIC: [u8; 4] = *b"PHD1";
pub const PHD1_VERSION: u16 = 1;

/// Output norms at or below this are rejected as degenerate.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub seed: u64,
}

impl HeadConfig {
    pub fn new(input_dim: usize, output_dim: usize, hidden_dims: Vec<usize>, seed: u64) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden_dims,
            seed,
        }
    }

    pub fn layer_count(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    /// input_dim, hidden dims…, output_dim.
    pub fn dim_chain(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 2);
        dims.push(self.input_dim);
        dims.extend(&self.hidden_dims);
        dims.push(self.output_dim);
        dims
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dims.len() > 2 {
            return Err(Error::InvalidConfig(format!(
                "{} hidden layers; at most 2 are supported",
                self.hidden_dims.len()
            )));
        }
        if self.dim_chain().contains(&0) {
            return Err(Error::InvalidConfig(format!(
                "zero dimension in layer chain {:?}",
                self.dim_chain()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weights: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.weights
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| dot(row, x) + b)
            .collect()
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub layers: Vec<Layer>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; entry 0 is the head input.
    inputs: Vec<Vec<f64>>,
    /// Pre-normalization output norm.
    raw_norm: f64,
    /// Normalized output.
    pub output: Vec<f64>,
}

/// Parameter gradients with the same shapes as the head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradients {
    pub layers: Vec<Layer>,
}

impl HeadGradients {
    pub fn zeros_like(head: &ProjectionHead) -> Self {
        Self {
            layers: head
                .layers
                .iter()
                .map(|l| Layer::zeros(l.rows, l.cols))
                .collect(),
        }
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
    }
}

impl ProjectionHead {
    /// Glorot-uniform weights drawn layer by layer in row-major order; zero biases.
    pub fn init(config: &HeadConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(config.seed);
        let dims = config.dim_chain();
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = Layer::zeros(fan_out, fan_in);
                for v in &mut layer.weights {
                    *v = rng.symmetric(a);
                }
                layer
            })
            .collect();
        Ok(Self { layers })
    }

    /// Builds a head from explicit layers, checking that they chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() || layers.len() > 3 {
            return Err(Error::ShapeMismatch(format!(
                "{} layers; expected 1 to 3",
                layers.len()
            )));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.rows == 0 || l.cols == 0 || l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(Error::ShapeMismatch(format!("layer {i} is inconsistent")));
            }
            if l.weights.iter().chain(&l.bias).any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch(format!("layer {i} has non-finite parameters")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].rows != pair[1].cols {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    pair[0].rows,
                    i + 1,
                    pair[1].cols
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].cols
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().rows
    }

    pub fn dim_chain(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.rows));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.output)
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.to_vec();
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = layer.affine(&h);
            if k < last {
                for v in &mut z {
                    *v = v.max(0.0);
                }
            }
            inputs.push(std::mem::replace(&mut h, z));
        }
        let raw_norm = norm(&h);
        if !(raw_norm > NORM_EPS) {
            return Err(Error::DegenerateOutput(raw_norm));
        }
        for v in &mut h {
            *v /= raw_norm;
        }
        Ok(ForwardCache {
            inputs,
            raw_norm,
            output: h,
        })
    }

    /// Forward pass over a batch; samples may run in parallel, output order is
    /// input order.
    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<ForwardCache>> {
        xs.par_iter().map(|x| self.forward_cached(x)).collect()
    }

    /// Gradients of a loss w.r.t. the parameters, given the loss gradient
    /// w.r.t. each normalized output. Recomputes the forward pass.
    pub fn backward(&self, inputs: &[Vec<f64>], upstream: &[Vec<f64>]) -> Result<HeadGradients> {
        let caches = self.forward_batch(inputs)?;
        self.backward_cached(&caches, upstream)
    }

    /// Gradients summed over the batch in sample order.
    pub fn backward_cached(
        &self,
        caches: &[ForwardCache],
        upstream: &[Vec<f64>],
    ) -> Result<HeadGradients> {
        if caches.len() != upstream.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} cached samples but {} upstream gradients",
                caches.len(),
                upstream.len()
            )));
        }
        let out_dim = self.output_dim();
        if let Some(u) = upstream.iter().find(|u| u.len() != out_dim) {
            return Err(Error::ShapeMismatch(format!(
                "upstream gradient has length {}, head output is {out_dim}",
                u.len()
            )));
        }
        if caches.iter().any(|c| c.inputs.len() != self.layers.len()) {
            return Err(Error::ShapeMismatch("cache does not belong to this head".into()));
        }

        // deltas[s][k] = dL/d(pre-activation of layer k) for sample s.
        let deltas: Vec<Vec<Vec<f64>>> = caches
            .par_iter()
            .zip(upstream.par_iter())
            .map(|(cache, up)| self.sample_deltas(cache, up))
            .collect();

        let mut grads = HeadGradients::zeros_like(self);
        for (k, g) in grads.layers.iter_mut().enumerate() {
            let cols = g.cols;
            g.weights
                .par_chunks_mut(cols)
                .zip(g.bias.par_iter_mut())
                .enumerate()
                .for_each(|(r, (row, b))| {
                    for (s, cache) in caches.iter().enumerate() {
                        let d = deltas[s][k][r];
                        if d == 0.0 {
                            continue;
                        }
                        *b += d;
                        for (w, x) in row.iter_mut().zip(&cache.inputs[k]) {
                            *w += d * x;
                        }
                    }
                });
        }
        Ok(grads)
    }

    fn sample_deltas(&self, cache: &ForwardCache, upstream: &[f64]) -> Vec<Vec<f64>> {
        let y = &cache.output;
        // Jacobian of y = z/|z| applied to the upstream gradient: (I - y yᵀ) g / |z|.
        let yg = dot(y, upstream);
        let mut delta: Vec<f64> = upstream
            .iter()
            .zip(y)
            .map(|(g, yi)| (g - yi * yg) / cache.raw_norm)
            .collect();
        let mut deltas = vec![Vec::new(); self.layers.len()];
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            if k > 0 {
                let mut prev = vec![0.0; layer.cols];
                for (row, d) in layer.weights.chunks_exact(layer.cols).zip(&delta) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                // The input to layer k is relu(pre-activation of layer k-1).
                for (p, h) in prev.iter_mut().zip(&cache.inputs[k]) {
                    if *h <= 0.0 {
                        *p = 0.0;
                    }
                }
                deltas[k] = std::mem::replace(&mut delta, prev);
            } else {
                deltas[0] = std::mem::take(&mut delta);
            }
        }
        deltas
    }

    pub fn check_gradients_shape(&self, grads: &HeadGradients) -> Result<()> {
        if grads.layers.len() != self.layers.len()
            || grads.layers.iter().zip(&self.layers).any(|(g, l)| !g.same_shape(l))
        {
            return Err(Error::ShapeMismatch("gradients do not match head".into()));
        }
        Ok(())
    }

    pub fn to_phd1_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(7 + self.parameter_count() * 8 + self.layers.len() * 8);
        out.extend_from_slice(&PHD1_MAGIC);
        out.extend_from_slice(&PHD1_VERSION.to_le_bytes());
        out.push(self.layers.len() as u8);
        for l in &self.layers {
            out.extend_from_slice(&(l.rows as u32).to_le_bytes());
            out.extend_from_slice(&(l.cols as u32).to_le_bytes());
            for v in l.weights.iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_phd1_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 7 {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes is shorter than the PHD1 header",
                bytes.len()
            )));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != PHD1_MAGIC {
            return Err(Error::BadMagic {
                expected: PHD1_MAGIC,
                found: magic,
            });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != PHD1_VERSION {
            return Err(Error::VersionUnsupported(version));
        }
        let count = bytes[6] as usize;
        let mut pos = 7;
        let mut layers = Vec::with_capacity(count);
        for k in 0..count {
            if bytes.len() < pos + 8 {
                return Err(Error::ShapeMismatch(format!("layer {k} header is truncated")));
            }
            let rows = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
            let cols = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
            pos += 8;
            let n = rows * cols + rows;
            if bytes.len() < pos + n * 8 {
                return Err(Error::ShapeMismatch(format!(
                    "layer {k} declares {rows}x{cols} but only {} parameter bytes remain",
                    bytes.len() - pos
                )));
            }
            let values: Vec<f64> = bytes[pos..pos + n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            pos += n * 8;
            let (weights, bias) = values.split_at(rows * cols);
            layers.push(Layer {
                rows,
                cols,
                weights: weights.to_vec(),
                bias: bias.to_vec(),
            });
        }
        if pos != bytes.len() {
            return Err(Error::TrailingBytes(bytes.len() - pos));
        }
        Self::from_layers(layers)
    }
}

pub fn save_head(head: &ProjectionHead, path: &Path) -> Result<()> {
    write_bytes(path, &head.to_phd1_bytes())
}

pub fn load_head(path: &Path) -> Result<ProjectionHead> {
    ProjectionHead::from_phd1_bytes(&read_bytes(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Layer {
        let mut l = Layer::zeros(n, n);
        for i in 0..n {
            l.weights[i * n + i] = 1.0;
        }
        l
    }

    #[test]
    fn init_is_deterministic_with_zero_bias() {
        let cfg = HeadConfig::new(2, 2, vec![], 9);
        let a = ProjectionHead::init(&cfg).unwrap();
        let b = ProjectionHead::init(&cfg).unwrap();
        assert_eq!(a, b);
        let cfg = HeadConfig::new(5, 3, vec![7, 4], 1);
        let h = ProjectionHead::init(&cfg).unwrap();
        assert_eq!(h.dim_chain(), vec![5, 7, 4, 3]);
        assert!(h.layers.iter().all(|l| l.bias.iter().all(|&b| b == 0.0)));
    }

    #[test]
    fn glorot_bound() {
        let h = ProjectionHead::init(&HeadConfig::new(4, 4, vec![], 3)).unwrap();
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(h.layers[0].weights.iter().all(|w| w.abs() < bound));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(ProjectionHead::init(&HeadConfig::new(4, 4, vec![1, 2, 3], 0)).is_err());
        assert!(ProjectionHead::init(&HeadConfig::new(4, 0, vec![], 0)).is_err());
    }

    #[test]
    fn forward_normalizes() {
        let h = ProjectionHead::from_layers(vec![identity(2)]).unwrap();
        let y = h.forward(&[3.0, 4.0]).unwrap();
        assert!((y[0] - 0.6).abs() < 1e-15 && (y[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn forward_two_layers_hand_computed() {
        let mut l1 = Layer::zeros(2, 2);
        l1.weights = vec![1.0, 0.0, 0.0, -1.0];
        let h = ProjectionHead::from_layers(vec![l1, identity(2)]).unwrap();
        assert_eq!(h.forward(&[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn zero_input_is_degenerate() {
        let h = ProjectionHead::init(&HeadConfig::new(3, 3, vec![], 1)).unwrap();
        assert!(matches!(h.forward(&[0.0; 3]), Err(Error::DegenerateOutput(_))));
        assert!(matches!(h.forward(&[0.0; 2]), Err(Error::DimMismatch { .. })));
    }

    #[test]
    fn backward_zero_and_linear() {
        let h = ProjectionHead::init(&HeadConfig::new(3, 4, vec![5], 2)).unwrap();
        let xs = vec![vec![0.3, -1.0, 2.0], vec![1.0, 0.5, 0.1]];
        let zero = h.backward(&xs, &[vec![0.0; 4], vec![0.0; 4]]).unwrap();
        assert!(zero.iter_values().all(|v| v == 0.0));

        let up = vec![vec![0.1, -0.2, 0.3, 0.4], vec![-1.0, 0.5, 0.25, 0.0]];
        let up2: Vec<Vec<f64>> = up.iter().map(|u| u.iter().map(|v| 2.0 * v).collect()).collect();
        let g1 = h.backward(&xs, &up).unwrap();
        let g2 = h.backward(&xs, &up2).unwrap();
        for (a, b) in g1.iter_values().zip(g2.iter_values()) {
            assert_eq!(2.0 * a, b);
        }
        assert!(matches!(
            h.backward(&xs, &up[..1]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn phd1_round_trip_and_truncation() {
        let h = ProjectionHead::init(&HeadConfig::new(3, 2, vec![4], 5)).unwrap();
        let bytes = h.to_phd1_bytes();
        assert_eq!(ProjectionHead::from_phd1_bytes(&bytes).unwrap(), h);
        assert!(matches!(
            ProjectionHead::from_phd1_bytes(&bytes[..bytes.len() - 8]),
            Err(Error::ShapeMismatch(_))
        ));
        let mut bad = bytes.clone();
        bad[3] = b'0';
        assert!(matches!(
            ProjectionHead::from_phd1_bytes(&bad),
            Err(Error::BadMagic { .. })
        ));
    }
}
