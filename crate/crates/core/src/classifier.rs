//! Nearest-class-mean decision rules over streaming statistics.
//!
//! | variant      | embedding            | similarity                          |
//! |--------------|----------------------|-------------------------------------|
//! | `randumb`    | random Fourier       | −(φ − μ_c)ᵀ(Ŝ + λI)⁻¹(φ − μ_c)      |
//! | `kernel_ncm` | random Fourier       | φᵀμ_c                               |
//! | `slda`       | none                 | −(x − μ_c)ᵀ(Ŝ + λI)⁻¹(x − μ_c)      |
//! | `ncm`        | none                 | xᵀμ_c                               |
//! | `rp_relu`    | max(0, Wx)           | as `randumb`                        |
//!
//! With a shared precision the Mahalanobis argmin equals the argmax of the
//! linear discriminants `w_cᵀφ + b_c`, `w_c = P⁻¹μ_c`, `b_c = −½μ_cᵀw_c`,
//! because the `φᵀP⁻¹φ` term is common to every class. `predict` uses the
//! linear form; `scores` reports the full squared distances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::estimator::{EstimatorMode, Normalizer, StreamingEstimator};
use crate::feature_map::{Embed, Embedding, EmbeddingSpec};
use crate::linalg::{dot, Matrix};
use crate::precision::{build_precision, oas_shrink, PrecisionModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Randumb,
    KernelNcm,
    Slda,
    Ncm,
    RpRelu,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Randumb,
        Variant::KernelNcm,
        Variant::Slda,
        Variant::Ncm,
        Variant::RpRelu,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Randumb => "randumb",
            Variant::KernelNcm => "kernel_ncm",
            Variant::Slda => "slda",
            Variant::Ncm => "ncm",
            Variant::RpRelu => "rp_relu",
        }
    }

    pub fn decorrelates(self) -> bool {
        matches!(self, Variant::Randumb | Variant::Slda | Variant::RpRelu)
    }

    pub fn needs_embedding(self) -> bool {
        matches!(self, Variant::Randumb | Variant::KernelNcm | Variant::RpRelu)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariant {
    pub variant: Variant,
    pub embedding: Option<EmbeddingSpec>,
    pub lambda: f64,
    pub estimator_mode: EstimatorMode,
    #[serde(default)]
    pub normalizer: Normalizer,
}

impl ModelVariant {
    pub fn validate(&self) -> Result<()> {
        match (self.variant, &self.embedding) {
            (Variant::Randumb | Variant::KernelNcm, Some(EmbeddingSpec::Fourier(_))) => {}
            (Variant::RpRelu, Some(EmbeddingSpec::RandomRelu(_))) => {}
            (Variant::Slda | Variant::Ncm, None) => {}
            (v, e) => {
                return Err(Error::Config(format!(
                    "variant {v} is incompatible with embedding {e:?}"
                )))
            }
        }
        if self.variant.decorrelates() && (!(self.lambda >= 0.0) || !self.lambda.is_finite()) {
            return Err(Error::Config(format!("ridge parameter must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    /// Dimension of the space the statistics live in.
    pub fn feature_dim(&self, input_dim: usize) -> usize {
        self.embedding.map_or(input_dim, |e| e.output_dim())
    }
}

/// A classifier that is still consuming the stream.
#[derive(Debug, Clone)]
pub struct StreamingClassifier {
    config: ModelVariant,
    input_dim: usize,
    embedding: Option<Embedding>,
    estimator: StreamingEstimator,
    buffer: Vec<f32>,
}

impl StreamingClassifier {
    pub fn new(config: ModelVariant, input_dim: usize) -> Result<Self> {
        config.validate()?;
        if input_dim == 0 {
            return Err(Error::Config("input dimension must be >= 1".into()));
        }
        if let Some(spec) = &config.embedding {
            if spec.input_dim() != input_dim {
                return Err(Error::Config(format!(
                    "embedding expects input dimension {}, data has {input_dim}",
                    spec.input_dim()
                )));
            }
        }
        let embedding = config.embedding.map(|s| s.build()).transpose()?;
        let dim = config.feature_dim(input_dim);
        let estimator = if config.variant.decorrelates() {
            StreamingEstimator::new(dim, config.estimator_mode, config.normalizer)
        } else {
            StreamingEstimator::means_only(dim)
        };
        Ok(Self {
            config,
            input_dim,
            buffer: vec![0.0; if embedding.is_some() { dim } else { 0 }],
            embedding,
            estimator,
        })
    }

    /// Reassembles a classifier from a checkpointed estimator.
    pub fn from_estimator(config: ModelVariant, input_dim: usize, estimator: StreamingEstimator) -> Result<Self> {
        let mut model = Self::new(config, input_dim)?;
        if estimator.dim() != model.estimator.dim()
            || estimator.tracks_scatter() != model.estimator.tracks_scatter()
        {
            return Err(Error::Config("checkpointed estimator does not match model variant".into()));
        }
        model.estimator = estimator;
        Ok(model)
    }

    pub fn config(&self) -> &ModelVariant {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn estimator(&self) -> &StreamingEstimator {
        &self.estimator
    }

    pub fn observe(&mut self, x: &[f32], label: u32) -> Result<()> {
        check_len(self.input_dim, x.len())?;
        match &self.embedding {
            Some(e) => {
                e.embed_into(x, &mut self.buffer)?;
                self.estimator.observe(&self.buffer, label)
            }
            None => self.estimator.observe(x, label),
        }
    }

    /// Fits a snapshot without disturbing the stream state.
    pub fn fit(&self) -> Result<FittedClassifier> {
        let fitted = if self.config.variant.decorrelates() {
            let cov = self.estimator.covariance()?;
            let means = self.estimator.class_means();
            fit_mahalanobis(cov, means, self.estimator.total_count(), self.config.lambda)?
        } else {
            fit_inner_product(self.estimator.class_means())?
        };
        Ok(fitted.with_context(self.config.clone(), self.input_dim, self.embedding.clone()))
    }

    /// Consumes the classifier, reusing the scatter storage for the factor.
    pub fn into_fitted(self) -> Result<FittedClassifier> {
        let Self {
            config,
            input_dim,
            embedding,
            estimator,
            ..
        } = self;
        let fitted = if config.variant.decorrelates() {
            let n = estimator.total_count();
            let (cov, means, _) = estimator.into_covariance()?;
            fit_mahalanobis(cov, means, n, config.lambda)?
        } else {
            fit_inner_product(estimator.class_means())?
        };
        Ok(fitted.with_context(config, input_dim, embedding))
    }
}

fn fit_inner_product(means: BTreeMap<u32, Vec<f64>>) -> Result<FittedParts> {
    if means.is_empty() {
        return Err(Error::EmptyModel);
    }
    let (labels, means): (Vec<u32>, Vec<Vec<f64>>) = means.into_iter().unzip();
    Ok(FittedParts {
        labels,
        means,
        rule: Rule::InnerProduct,
    })
}

fn fit_mahalanobis(cov: Matrix, means: BTreeMap<u32, Vec<f64>>, n: u64, lambda: f64) -> Result<FittedParts> {
    if means.is_empty() {
        return Err(Error::EmptyModel);
    }
    let shrink = oas_shrink(cov, n)?;
    let rho = shrink.rho;
    let precision = build_precision(shrink.shrunk, lambda)?;
    let (labels, means): (Vec<u32>, Vec<Vec<f64>>) = means.into_iter().unzip();
    let mut weights = Vec::with_capacity(means.len());
    let mut biases = Vec::with_capacity(means.len());
    for mean in &means {
        let w = precision.solve(mean)?;
        biases.push(-0.5 * dot(mean, &w));
        weights.push(w);
    }
    Ok(FittedParts {
        labels,
        means,
        rule: Rule::Mahalanobis {
            precision,
            rho,
            weights,
            biases,
        },
    })
}

struct FittedParts {
    labels: Vec<u32>,
    means: Vec<Vec<f64>>,
    rule: Rule,
}

impl FittedParts {
    fn with_context(self, config: ModelVariant, input_dim: usize, embedding: Option<Embedding>) -> FittedClassifier {
        FittedClassifier {
            config,
            input_dim,
            embedding,
            labels: self.labels,
            means: self.means,
            rule: self.rule,
        }
    }
}

#[derive(Debug, Clone)]
enum Rule {
    InnerProduct,
    Mahalanobis {
        precision: PrecisionModel,
        rho: f64,
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
    },
}

/// Immutable classifier ready for prediction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct FittedClassifier {
    config: ModelVariant,
    input_dim: usize,
    embedding: Option<Embedding>,
    labels: Vec<u32>,
    means: Vec<Vec<f64>>,
    rule: Rule,
}

impl FittedClassifier {
    pub fn config(&self) -> &ModelVariant {
        &self.config
    }

    /// Labels the model can predict, ascending.
    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn shrinkage_rho(&self) -> Option<f64> {
        match &self.rule {
            Rule::Mahalanobis { rho, .. } => Some(*rho),
            Rule::InnerProduct => None,
        }
    }

    pub fn precision(&self) -> Option<&PrecisionModel> {
        match &self.rule {
            Rule::Mahalanobis { precision, .. } => Some(precision),
            Rule::InnerProduct => None,
        }
    }

    /// True when `scores` are distances (smaller wins).
    pub fn minimizes(&self) -> bool {
        matches!(self.rule, Rule::Mahalanobis { .. })
    }

    fn features(&self, x: &[f32]) -> Result<Vec<f64>> {
        check_len(self.input_dim, x.len())?;
        Ok(match &self.embedding {
            Some(e) => e.embed(x)?.into_iter().map(f64::from).collect(),
            None => {
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data("non-finite value in input vector".into()));
                }
                x.iter().map(|&v| v as f64).collect()
            }
        })
    }

    pub fn predict(&self, x: &[f32]) -> Result<u32> {
        let phi = self.features(x)?;
        Ok(self.predict_features(&phi))
    }

    /// Prediction from an already-embedded vector. Ties go to the smallest
    /// label because classes are scanned in ascending order with a strict
    /// comparison.
    pub fn predict_features(&self, phi: &[f64]) -> u32 {
        let score = |k: usize| match &self.rule {
            Rule::InnerProduct => dot(phi, &self.means[k]),
            Rule::Mahalanobis { weights, biases, .. } => dot(phi, &weights[k]) + biases[k],
        };
        let mut best = (score(0), 0);
        for k in 1..self.labels.len() {
            let s = score(k);
            if s > best.0 {
                best = (s, k);
            }
        }
        self.labels[best.1]
    }

    /// Per-class values behind `predict`: squared Mahalanobis distances for
    /// decorrelating variants, inner products otherwise.
    pub fn scores(&self, x: &[f32]) -> Result<BTreeMap<u32, f64>> {
        let phi = self.features(x)?;
        self.scores_features(&phi)
    }

    pub fn scores_features(&self, phi: &[f64]) -> Result<BTreeMap<u32, f64>> {
        let mut out = BTreeMap::new();
        let mut delta = vec![0.0; phi.len()];
        for (k, &label) in self.labels.iter().enumerate() {
            let s = match &self.rule {
                Rule::InnerProduct => dot(phi, &self.means[k]),
                Rule::Mahalanobis { precision, .. } => {
                    for ((d, p), m) in delta.iter_mut().zip(phi).zip(&self.means[k]) {
                        *d = p - m;
                    }
                    precision.mahalanobis_sq(&delta)?
                }
            };
            out.insert(label, s);
        }
        Ok(out)
    }
}
