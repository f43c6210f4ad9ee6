//! Exemplar-free streaming classification with random Fourier features.
//!
//! Raw inputs are mapped through a frozen random Fourier basis
//! ([`feature_map`]), per-class means and a pooled covariance are updated
//! one sample at a time ([`estimator`]), and predictions use the nearest
//! class mean under an OAS-shrunk, ridge-regularized Mahalanobis distance
//! ([`precision`], [`classifier`]). [`bench`] drives class-incremental
//! one-pass runs over the loaders in [`data_io`]; [`oracle`] holds
//! brute-force references used by tests and the `verify` command.

pub mod bench;
pub mod classifier;
pub mod data_io;
pub mod error;
pub mod estimator;
pub mod feature_map;
pub mod linalg;
pub mod oracle;
pub mod precision;
pub mod rng;

pub use classifier::{FittedClassifier, ModelVariant, StreamingClassifier, Variant};
pub use error::{Error, Result};
pub use estimator::{EstimatorMode, Normalizer, StreamingEstimator};
pub use feature_map::{Embed, Embedding, EmbeddingSpec, FeatureMap, FeatureMapSpec, RandomReluMap, RpSpec};
pub use linalg::Matrix;
pub use precision::{build_precision, oas_shrink, sherman_morrison_update, PrecisionModel, ShrinkageResult};
