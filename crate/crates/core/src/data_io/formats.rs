//! IDX, CIFAR binary and RDFB feature containers.

use std::path::Path;

use super::bytes::{dim_u32, read_file, write_file, Reader, Writer};
use super::Image;
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Parses an IDX3 image tensor (`N × rows × cols`, u8, big-endian header).
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<Image>> {
    let mut r = Reader::new(bytes, path);
    let magic = r.u32_be("magic").map_err(|_| bad_magic(path, IDX_IMAGES_MAGIC, bytes))?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(bad_magic(path, IDX_IMAGES_MAGIC, bytes));
    }
    let count = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    let size = rows * cols;
    let payload = r.take(count * size, "image payload")?;
    r.finish()?;
    Ok(payload
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| Image {
            channels: 1,
            height: rows,
            width: cols,
            pixels: px.to_vec(),
        })
        .collect())
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u32>> {
    let mut r = Reader::new(bytes, path);
    let magic = r.u32_be("magic").map_err(|_| bad_magic(path, IDX_LABELS_MAGIC, bytes))?;
    if magic != IDX_LABELS_MAGIC {
        return Err(bad_magic(path, IDX_LABELS_MAGIC, bytes));
    }
    let count = r.u32_be("label count")? as usize;
    let labels = r.take(count, "label payload")?.iter().map(|&b| b as u32).collect();
    r.finish()?;
    Ok(labels)
}

fn bad_magic(path: &Path, expected: u32, bytes: &[u8]) -> Error {
    let found = bytes.get(..4).map_or_else(
        || format!("{} byte file", bytes.len()),
        |b| format!("0x{:08x}", u32::from_be_bytes([b[0], b[1], b[2], b[3]])),
    );
    Error::format(path, 0, format!("bad IDX magic: expected 0x{expected:08x}, found {found}"))
}

/// Loads an IDX image file and its label file; their counts must agree.
pub fn load_idx(images: &Path, labels: &Path) -> Result<(Vec<Image>, Vec<u32>)> {
    let imgs = parse_idx_images(&read_file(images)?, images)?;
    let labs = parse_idx_labels(&read_file(labels)?, labels)?;
    if imgs.len() != labs.len() {
        return Err(Error::format(
            labels,
            4,
            format!("count mismatch: {} images vs {} labels", imgs.len(), labs.len()),
        ));
    }
    Ok((imgs, labs))
}

/// Label layout of a CIFAR-style binary record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CifarLabels {
    /// 1 label byte, 10 classes.
    Cifar10,
    /// 2 label bytes; the first (coarse, 20 classes) is used.
    Cifar100Coarse,
    /// 2 label bytes; the second (fine, 100 classes) is used.
    Cifar100Fine,
    /// 1 label byte with a custom class count (pre-downscaled 32×32 sets).
    SingleByte { num_classes: u32 },
}

impl CifarLabels {
    pub fn label_bytes(self) -> usize {
        match self {
            CifarLabels::Cifar10 | CifarLabels::SingleByte { .. } => 1,
            CifarLabels::Cifar100Coarse | CifarLabels::Cifar100Fine => 2,
        }
    }

    pub fn num_classes(self) -> u32 {
        match self {
            CifarLabels::Cifar10 => 10,
            CifarLabels::Cifar100Coarse => 20,
            CifarLabels::Cifar100Fine => 100,
            CifarLabels::SingleByte { num_classes } => num_classes,
        }
    }

    pub fn record_len(self) -> usize {
        self.label_bytes() + CIFAR_PIXELS
    }
}

pub const CIFAR_PIXELS: usize = 3 * 32 * 32;

pub fn parse_cifar_binary(bytes: &[u8], path: &Path, labels: CifarLabels) -> Result<(Vec<Image>, Vec<u32>)> {
    let rec = labels.record_len();
    if bytes.len() % rec != 0 {
        return Err(Error::format(
            path,
            (bytes.len() - bytes.len() % rec) as u64,
            format!("size {} is not a multiple of the {rec}-byte record", bytes.len()),
        ));
    }
    let mut images = Vec::with_capacity(bytes.len() / rec);
    let mut out_labels = Vec::with_capacity(bytes.len() / rec);
    for (k, record) in bytes.chunks_exact(rec).enumerate() {
        let label = match labels {
            CifarLabels::Cifar100Fine => record[1],
            _ => record[0],
        } as u32;
        if label >= labels.num_classes() {
            return Err(Error::format(
                path,
                (k * rec) as u64,
                format!("label {label} outside [0, {})", labels.num_classes()),
            ));
        }
        out_labels.push(label);
        images.push(Image {
            channels: 3,
            height: 32,
            width: 32,
            pixels: record[labels.label_bytes()..].to_vec(),
        });
    }
    Ok((images, out_labels))
}

pub fn load_cifar_binary(path: &Path, labels: CifarLabels) -> Result<(Vec<Image>, Vec<u32>)> {
    parse_cifar_binary(&read_file(path)?, path, labels)
}

pub const RDFB_MAGIC: &[u8; 4] = b"RDFB";
pub const RDFB_VERSION: u32 = 1;
const RDFB_DTYPE_F32: u8 = 0;

/// Precomputed feature vectors with integer labels.
///
/// Layout (little-endian): `"RDFB"`, u32 version = 1, u32 N, u32 dim,
/// u8 dtype (0 = f32), 3 zero pad bytes, `N·dim` f32, `N` u32 labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub dim: usize,
    /// Row-major `N × dim`.
    pub vectors: Vec<f32>,
    pub labels: Vec<u32>,
}

impl FeatureFile {
    pub fn new(dim: usize, vectors: Vec<f32>, labels: Vec<u32>) -> Result<Self> {
        if dim == 0 || vectors.len() != dim * labels.len() {
            return Err(Error::Data(format!(
                "feature payload of {} values does not match {} labels × dim {dim}",
                vectors.len(),
                labels.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self { dim, vectors, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.raw(RDFB_MAGIC)
            .u32(RDFB_VERSION)
            .u32(dim_u32(self.len(), "sample count")?)
            .u32(dim_u32(self.dim, "feature dimension")?)
            .u8(RDFB_DTYPE_F32)
            .raw(&[0, 0, 0]);
        w.bytes.reserve(self.vectors.len() * 4 + self.labels.len() * 4);
        for v in &self.vectors {
            w.raw(&v.to_le_bytes());
        }
        for &l in &self.labels {
            w.u32(l);
        }
        Ok(w.bytes)
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader::new(bytes, path);
        if r.take(4, "magic")? != RDFB_MAGIC {
            return Err(Error::format(path, 0, "bad magic, expected \"RDFB\""));
        }
        let version = r.u32_le("version")?;
        if version != RDFB_VERSION {
            return Err(r.error(format!("unsupported version {version}")));
        }
        let n = r.u32_le("sample count")? as usize;
        let dim = r.u32_le("dimension")? as usize;
        let dtype = r.u8("dtype")?;
        if dtype != RDFB_DTYPE_F32 {
            return Err(r.error(format!("unsupported dtype tag {dtype}")));
        }
        if r.take(3, "padding")? != [0, 0, 0] {
            return Err(r.error("non-zero padding bytes"));
        }
        if dim == 0 {
            return Err(r.error("dimension must be positive"));
        }
        let payload = r.take(n * dim * 4, "feature payload")?;
        let start = r.offset() - payload.len();
        let mut vectors = Vec::with_capacity(n * dim);
        for (k, c) in payload.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if !v.is_finite() {
                return Err(Error::format(path, (start + 4 * k) as u64, "non-finite feature value"));
            }
            vectors.push(v);
        }
        let labels = r
            .take(n * 4, "label payload")?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        r.finish()?;
        Ok(Self { dim, vectors, labels })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&read_file(path)?, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode()?)
    }
}

pub fn load_feature_file(path: &Path) -> Result<FeatureFile> {
    FeatureFile::read(path)
}
