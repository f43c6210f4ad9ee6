//! Little-endian checkpoint containers.
//!
//! Estimator (`RDES`):
//!
//! ```text
//! "RDES" u32 version=1
//! u8 has_scatter  u8 mode (0 pooled, 1 global)  u8 normalizer (0 n−1, 1 n−C)  u8 pad
//! u32 dim  u32 num_classes  u64 total_count
//! dim × f64 global mean
//! per class, ascending label: u32 label, u32 pad, u64 count, dim × f64 mean
//! if has_scatter: dim·(dim+1)/2 × f64 scatter upper triangle, row-major
//! ```
//!
//! Model (`RDCK`): `"RDCK" u32 version=1`, u8 variant tag, u8 embedding
//! kind (0 none, 1 fourier, 2 rp_relu), 2 pad bytes, u32 input_dim,
//! u32 embedding output dim, f64 gamma, u64 embedding seed, f64 λ, then an
//! embedded `RDES` blob.
//!
//! Precision (`RDPR`): `"RDPR" u32 version=1 u32 dim u32 pad`, f64 ρ, f64 μ,
//! f64 λ, upper triangle of the shrunk covariance.

use std::path::Path;

use super::bytes::{dim_u32, Reader, Writer};
use crate::classifier::{ModelVariant, StreamingClassifier, Variant};
use crate::error::{Error, Result};
use crate::estimator::{ClassStats, EstimatorMode, Normalizer, ScatterAccumulator, StreamingEstimator};
use crate::feature_map::{EmbeddingSpec, FeatureMapSpec, RpSpec};
use crate::linalg::Matrix;
use crate::precision::ShrinkageResult;

const VERSION: u32 = 1;

fn upper(w: &mut Writer, m: &Matrix) {
    for i in 0..m.dim() {
        w.f64s(&m.row(i)[i..]);
    }
}

fn read_upper(r: &mut Reader<'_>, dim: usize) -> Result<Matrix> {
    let mut m = Matrix::zeros(dim);
    for i in 0..dim {
        let row = r.f64_vec(dim - i, "matrix row")?;
        m.row_mut(i)[i..].copy_from_slice(&row);
    }
    Ok(m)
}

fn magic(r: &mut Reader<'_>, expected: &[u8; 4]) -> Result<()> {
    let at = r.offset();
    let m = r.take(4, "magic")?;
    if m != expected {
        return Err(Error::Format {
            path: "<checkpoint>".into(),
            offset: at as u64,
            reason: format!("bad magic, expected {:?}", String::from_utf8_lossy(expected)),
        });
    }
    let v = r.u32_le("version")?;
    if v != VERSION {
        return Err(r.error(format!("unsupported checkpoint version {v}")));
    }
    Ok(())
}

fn write_estimator_into(w: &mut Writer, est: &StreamingEstimator) -> Result<()> {
    let (has, mode) = match est.scatter() {
        Some(s) => (1, s.mode),
        None => (0, EstimatorMode::PooledWithinClass),
    };
    w.raw(b"RDES")
        .u32(VERSION)
        .u8(has)
        .u8(match mode {
            EstimatorMode::PooledWithinClass => 0,
            EstimatorMode::Global => 1,
        })
        .u8(match est.normalizer() {
            Normalizer::SamplesMinusOne => 0,
            Normalizer::SamplesMinusClasses => 1,
        })
        .u8(0)
        .u32(dim_u32(est.dim(), "dimension")?)
        .u32(dim_u32(est.num_classes(), "class count")?)
        .u64(est.total_count())
        .f64s(est.global_mean());
    for c in est.class_stats() {
        w.u32(c.class_id).u32(0).u64(c.count).f64s(&c.mean);
    }
    if let Some(s) = est.scatter() {
        upper(w, &s.scatter);
    }
    Ok(())
}

pub fn encode_estimator(est: &StreamingEstimator) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    write_estimator_into(&mut w, est)?;
    Ok(w.bytes)
}

fn read_estimator(r: &mut Reader<'_>) -> Result<StreamingEstimator> {
    magic(r, b"RDES")?;
    let has = r.u8("scatter flag")?;
    let mode = match r.u8("mode")? {
        0 => EstimatorMode::PooledWithinClass,
        1 => EstimatorMode::Global,
        m => return Err(r.error(format!("unknown estimator mode {m}"))),
    };
    let normalizer = match r.u8("normalizer")? {
        0 => Normalizer::SamplesMinusOne,
        1 => Normalizer::SamplesMinusClasses,
        m => return Err(r.error(format!("unknown normalizer {m}"))),
    };
    r.u8("padding")?;
    let dim = r.u32_le("dimension")? as usize;
    let num_classes = r.u32_le("class count")? as usize;
    let total = r.u64_le("total count")?;
    let global_mean = r.f64_vec(dim, "global mean")?;
    let mut classes = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let class_id = r.u32_le("label")?;
        r.u32_le("padding")?;
        let count = r.u64_le("class count")?;
        let mean = r.f64_vec(dim, "class mean")?;
        classes.push(ClassStats { class_id, count, mean });
    }
    let scatter = match has {
        0 => None,
        1 => Some(ScatterAccumulator {
            total_count: total,
            scatter: read_upper(r, dim)?,
            mode,
        }),
        f => return Err(r.error(format!("bad scatter flag {f}"))),
    };
    let est = StreamingEstimator::from_parts(dim, normalizer, classes, scatter, global_mean)?;
    if est.total_count() != total {
        return Err(r.error("class counts do not sum to total count"));
    }
    Ok(est)
}

pub fn decode_estimator(bytes: &[u8]) -> Result<StreamingEstimator> {
    let mut r = Reader::new(bytes, Path::new("<checkpoint>"));
    let est = read_estimator(&mut r)?;
    r.finish()?;
    Ok(est)
}

fn variant_tag(v: Variant) -> u8 {
    Variant::ALL.iter().position(|&x| x == v).expect("listed variant") as u8
}

pub fn encode_model(model: &StreamingClassifier) -> Result<Vec<u8>> {
    let cfg = model.config();
    let mut w = Writer::default();
    let (kind, out_dim, gamma, seed) = match cfg.embedding {
        None => (0, 0, 0.0, 0),
        Some(EmbeddingSpec::Fourier(s)) => (1, s.output_dim(), s.gamma, s.seed),
        Some(EmbeddingSpec::RandomRelu(s)) => (2, s.output_dim, 0.0, s.seed),
    };
    w.raw(b"RDCK")
        .u32(VERSION)
        .u8(variant_tag(cfg.variant))
        .u8(kind)
        .raw(&[0, 0])
        .u32(dim_u32(model.input_dim(), "input dimension")?)
        .u32(dim_u32(out_dim, "embedding dimension")?)
        .f64(gamma)
        .u64(seed)
        .f64(cfg.lambda);
    write_estimator_into(&mut w, model.estimator())?;
    Ok(w.bytes)
}

pub fn decode_model(bytes: &[u8]) -> Result<StreamingClassifier> {
    let mut r = Reader::new(bytes, Path::new("<checkpoint>"));
    magic(&mut r, b"RDCK")?;
    let tag = r.u8("variant")? as usize;
    let variant = *Variant::ALL
        .get(tag)
        .ok_or_else(|| r.error(format!("unknown variant tag {tag}")))?;
    let kind = r.u8("embedding kind")?;
    r.take(2, "padding")?;
    let input_dim = r.u32_le("input dimension")? as usize;
    let out_dim = r.u32_le("embedding dimension")? as usize;
    let gamma = r.f64_le("gamma")?;
    let seed = r.u64_le("seed")?;
    let lambda = r.f64_le("lambda")?;
    let embedding = match kind {
        0 => None,
        1 => Some(EmbeddingSpec::Fourier(FeatureMapSpec::from_embedding_size(
            input_dim, out_dim, gamma, seed,
        )?)),
        2 => Some(EmbeddingSpec::RandomRelu(RpSpec {
            input_dim,
            output_dim: out_dim,
            seed,
        })),
        k => return Err(r.error(format!("unknown embedding kind {k}"))),
    };
    let estimator = read_estimator(&mut r)?;
    r.finish()?;
    let config = ModelVariant {
        variant,
        embedding,
        lambda,
        estimator_mode: estimator.mode().unwrap_or_default(),
        normalizer: estimator.normalizer(),
    };
    StreamingClassifier::from_estimator(config, input_dim, estimator)
}

pub fn encode_precision(shrinkage: &ShrinkageResult, lambda: f64) -> Result<Vec<u8>> {
    let mut w = Writer::default();
    w.raw(b"RDPR")
        .u32(VERSION)
        .u32(dim_u32(shrinkage.shrunk.dim(), "dimension")?)
        .u32(0)
        .f64(shrinkage.rho)
        .f64(shrinkage.mu)
        .f64(lambda);
    upper(&mut w, &shrinkage.shrunk);
    Ok(w.bytes)
}

pub fn decode_precision(bytes: &[u8]) -> Result<(ShrinkageResult, f64)> {
    let mut r = Reader::new(bytes, Path::new("<checkpoint>"));
    magic(&mut r, b"RDPR")?;
    let dim = r.u32_le("dimension")? as usize;
    r.u32_le("padding")?;
    let rho = r.f64_le("rho")?;
    let mu = r.f64_le("mu")?;
    let lambda = r.f64_le("lambda")?;
    let mut shrunk = read_upper(&mut r, dim)?;
    r.finish()?;
    shrunk.mirror_upper();
    Ok((ShrinkageResult { rho, mu, shrunk }, lambda))
}

pub fn write_model(path: &Path, model: &StreamingClassifier) -> Result<()> {
    super::bytes::write_file(path, &encode_model(model)?)
}

pub fn read_model(path: &Path) -> Result<StreamingClassifier> {
    decode_model(&super::bytes::read_file(path)?).map_err(|e| match e {
        Error::Format { offset, reason, .. } => Error::format(path, offset, reason),
        other => other,
    })
}
