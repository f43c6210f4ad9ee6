//! Random Fourier features for the RBF kernel `k(x, y) = exp(-γ‖x − y‖²)`.
//!
//! `D` frequency vectors `ω_i ~ N(0, 2γI)` are drawn once from a seed and
//! never change. An input `x` maps to the `2D`-dimensional vector
//!
//! ```text
//! φ(x) = [cos(ω_1ᵀx), sin(ω_1ᵀx), …, cos(ω_Dᵀx), sin(ω_Dᵀx)] / √D
//! ```
//!
//! so that `φ(x)ᵀφ(y) = (1/D) Σ cos(ω_iᵀ(x − y))`, an unbiased estimate of
//! the kernel. Every embedding has unit norm.
//!
//! The module also hosts the random-projection + ReLU map used as an
//! alternative embedding in ablations.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub input_dim: usize,
    pub num_bases: usize,
    pub gamma: f64,
    pub seed: u64,
}

impl FeatureMapSpec {
    /// Spec from the total embedding size `E = 2D`; odd sizes are rejected.
    pub fn from_embedding_size(input_dim: usize, embed_dim: usize, gamma: f64, seed: u64) -> Result<Self> {
        if embed_dim == 0 || embed_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "embedding size must be a positive even number, got {embed_dim}"
            )));
        }
        let spec = Self {
            input_dim,
            num_bases: embed_dim / 2,
            gamma,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn output_dim(&self) -> usize {
        2 * self.num_bases
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("feature map input dimension must be >= 1".into()));
        }
        if self.num_bases == 0 {
            return Err(Error::Config("feature map needs at least one basis".into()));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Frozen Fourier basis. Rows of `omegas` are the frequency vectors.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    spec: FeatureMapSpec,
    omegas: Vec<f32>,
    scale: f64,
}

impl FeatureMap {
    /// Draws every entry of the `D × d` basis independently from `N(0, 2γ)`.
    pub fn sample(spec: FeatureMapSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = SeededRng::new(spec.seed);
        let std_dev = (2.0 * spec.gamma).sqrt();
        let omegas = (0..spec.num_bases * spec.input_dim)
            .map(|_| (std_dev * rng.standard_normal()) as f32)
            .collect();
        Ok(Self::with_omegas(spec, omegas))
    }

    fn with_omegas(spec: FeatureMapSpec, omegas: Vec<f32>) -> Self {
        Self {
            spec,
            omegas,
            scale: 1.0 / (spec.num_bases as f64).sqrt(),
        }
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn omegas(&self) -> &[f32] {
        &self.omegas
    }

    pub fn omega(&self, i: usize) -> &[f32] {
        let d = self.spec.input_dim;
        &self.omegas[i * d..(i + 1) * d]
    }

    /// Writes the basis as raw little-endian `f32`, row-major `D × d`.
    pub fn export_omegas(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(self.omegas.len() * 4);
        for v in &self.omegas {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    /// Reads a basis written by [`FeatureMap::export_omegas`]. The byte
    /// count must match the spec exactly.
    pub fn import_omegas(spec: FeatureMapSpec, mut input: impl Read) -> Result<Self> {
        spec.validate()?;
        let mut bytes = Vec::new();
        input
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io("<omegas>", e))?;
        let expected = spec.num_bases * spec.input_dim * 4;
        if bytes.len() != expected {
            return Err(Error::format(
                "<omegas>",
                bytes.len().min(expected) as u64,
                format!("expected {expected} bytes of f32 omegas, found {}", bytes.len()),
            ));
        }
        let omegas = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self::with_omegas(spec, omegas))
    }
}

/// Dot product of an `f32` row with an input, eight partial sums wide.
/// Each output coordinate is computed independently, so blocking over rows
/// never changes results.
fn projection(row: &[f32], x: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let mut row_chunks = row.chunks_exact(8);
    let mut x_chunks = x.chunks_exact(8);
    for (r, v) in (&mut row_chunks).zip(&mut x_chunks) {
        for k in 0..8 {
            acc[k] += r[k] * v[k];
        }
    }
    let tail: f32 = row_chunks
        .remainder()
        .iter()
        .zip(x_chunks.remainder())
        .map(|(a, b)| a * b)
        .sum();
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

/// A fixed map from raw inputs to an embedding space.
pub trait Embed {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// Writes the embedding of `x` into `out` (length `output_dim`).
    fn embed_into(&self, x: &[f32], out: &mut [f32]) -> Result<()>;

    fn embed(&self, x: &[f32]) -> Result<Vec<f32>> {
        let mut out = vec![0.0; self.output_dim()];
        self.embed_into(x, &mut out)?;
        Ok(out)
    }
}

impl Embed for FeatureMap {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    fn embed_into(&self, x: &[f32], out: &mut [f32]) -> Result<()> {
        check_len(self.spec.input_dim, x.len())?;
        check_len(self.output_dim(), out.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in input vector".into()));
        }
        for (i, pair) in out.chunks_exact_mut(2).enumerate() {
            let t = projection(self.omega(i), x) as f64;
            pair[0] = (t.cos() * self.scale) as f32;
            pair[1] = (t.sin() * self.scale) as f32;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RpSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub seed: u64,
}

/// `x ↦ max(0, W x)` with i.i.d. standard normal `W`.
#[derive(Debug, Clone)]
pub struct RandomReluMap {
    spec: RpSpec,
    weights: Vec<f32>,
}

impl RandomReluMap {
    pub fn sample(spec: RpSpec) -> Result<Self> {
        if spec.input_dim == 0 || spec.output_dim == 0 {
            return Err(Error::Config("random projection dimensions must be >= 1".into()));
        }
        let mut rng = SeededRng::new(spec.seed);
        let weights = (0..spec.input_dim * spec.output_dim)
            .map(|_| rng.standard_normal() as f32)
            .collect();
        Ok(Self { spec, weights })
    }

    pub fn spec(&self) -> &RpSpec {
        &self.spec
    }
}

impl Embed for RandomReluMap {
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    fn embed_into(&self, x: &[f32], out: &mut [f32]) -> Result<()> {
        let d = self.spec.input_dim;
        check_len(d, x.len())?;
        check_len(self.spec.output_dim, out.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite value in input vector".into()));
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o = projection(&self.weights[i * d..(i + 1) * d], x).max(0.0);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSpec {
    Fourier(FeatureMapSpec),
    RandomRelu(RpSpec),
}

impl EmbeddingSpec {
    pub fn input_dim(&self) -> usize {
        match self {
            EmbeddingSpec::Fourier(s) => s.input_dim,
            EmbeddingSpec::RandomRelu(s) => s.input_dim,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            EmbeddingSpec::Fourier(s) => s.output_dim(),
            EmbeddingSpec::RandomRelu(s) => s.output_dim,
        }
    }

    pub fn build(&self) -> Result<Embedding> {
        Ok(match *self {
            EmbeddingSpec::Fourier(s) => Embedding::Fourier(FeatureMap::sample(s)?),
            EmbeddingSpec::RandomRelu(s) => Embedding::RandomRelu(RandomReluMap::sample(s)?),
        })
    }
}

#[derive(Debug, Clone)]
pub enum Embedding {
    Fourier(FeatureMap),
    RandomRelu(RandomReluMap),
}

impl Embedding {
    pub fn spec(&self) -> EmbeddingSpec {
        match self {
            Embedding::Fourier(m) => EmbeddingSpec::Fourier(*m.spec()),
            Embedding::RandomRelu(m) => EmbeddingSpec::RandomRelu(*m.spec()),
        }
    }
}

impl Embed for Embedding {
    fn input_dim(&self) -> usize {
        match self {
            Embedding::Fourier(m) => m.input_dim(),
            Embedding::RandomRelu(m) => m.input_dim(),
        }
    }

    fn output_dim(&self) -> usize {
        match self {
            Embedding::Fourier(m) => m.output_dim(),
            Embedding::RandomRelu(m) => m.output_dim(),
        }
    }

    fn embed_into(&self, x: &[f32], out: &mut [f32]) -> Result<()> {
        match self {
            Embedding::Fourier(m) => m.embed_into(x, out),
            Embedding::RandomRelu(m) => m.embed_into(x, out),
        }
    }
}
