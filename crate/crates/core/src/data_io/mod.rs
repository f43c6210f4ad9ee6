//! Dataset loading, normalization and flip augmentation.

mod bytes;
pub mod checkpoint;
pub mod formats;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
pub use formats::{
    load_cifar_binary, load_feature_file, load_idx, parse_cifar_binary, parse_idx_images,
    parse_idx_labels, CifarLabels, FeatureFile,
};

/// 8-bit image stored channel-major (`C × H × W`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        check_len(channels * height * width, pixels.len())?;
        Ok(Self {
            channels,
            height,
            width,
            pixels,
        })
    }

    /// Mirror image: columns reversed in every channel.
    pub fn flip_horizontal(&self) -> Image {
        let mut pixels = self.pixels.clone();
        for row in pixels.chunks_exact_mut(self.width.max(1)) {
            row.reverse();
        }
        Image {
            pixels,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawSample {
    Image(Image),
    Features(Vec<f32>),
}

/// Horizontal flip of an unflattened image sample. Feature vectors have no
/// spatial layout and are rejected.
pub fn flip_horizontal(sample: &RawSample) -> Result<RawSample> {
    match sample {
        RawSample::Image(img) => Ok(RawSample::Image(img.flip_horizontal())),
        RawSample::Features(_) => Err(Error::UnsupportedAugmentation(
            "cannot flip precomputed feature vectors".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Flipped,
}

/// A flattened, normalized training or test vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f32>,
    pub label: u32,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default)]
pub struct Split {
    pub samples: Vec<RawSample>,
    pub labels: Vec<u32>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn from_images(images: Vec<Image>, labels: Vec<u32>) -> Self {
        Self {
            samples: images.into_iter().map(RawSample::Image).collect(),
            labels,
        }
    }

    pub fn from_features(file: FeatureFile) -> Self {
        let samples = (0..file.len())
            .map(|i| RawSample::Features(file.vector(i).to_vec()))
            .collect();
        Self {
            samples,
            labels: file.labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Zero for feature datasets.
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub channel_means: Vec<f64>,
    pub channel_stds: Vec<f64>,
    pub train_count: usize,
    pub test_count: usize,
    /// Applied after the per-channel constants, to images and features alike.
    #[serde(default)]
    pub input_norm: InputNorm,
}

/// Per-sample rescaling of the flattened input vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputNorm {
    None,
    /// Divide by the Euclidean norm; all-zero vectors pass through.
    #[default]
    UnitL2,
}

impl InputNorm {
    pub fn apply(self, v: &mut [f32]) {
        if self == InputNorm::UnitL2 {
            let norm = v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in v.iter_mut() {
                    *x = (*x as f64 / norm) as f32;
                }
            }
        }
    }
}

impl DatasetDescriptor {
    fn image(name: &str, c: usize, hw: usize, classes: usize, means: &[f64], stds: &[f64], counts: (usize, usize)) -> Self {
        Self {
            name: name.into(),
            input_dim: c * hw * hw,
            num_classes: classes,
            channels: c,
            height: hw,
            width: hw,
            channel_means: means.to_vec(),
            channel_stds: stds.to_vec(),
            train_count: counts.0,
            test_count: counts.1,
            input_norm: InputNorm::default(),
        }
    }

    pub fn mnist() -> Self {
        Self::image("mnist", 1, 28, 10, &[0.1307], &[0.3081], (60_000, 10_000))
    }

    pub fn cifar10() -> Self {
        Self::image(
            "cifar10",
            3,
            32,
            10,
            &[0.4914, 0.4822, 0.4465],
            &[0.2470, 0.2435, 0.2616],
            (50_000, 10_000),
        )
    }

    pub fn cifar100() -> Self {
        Self::image(
            "cifar100",
            3,
            32,
            100,
            &[0.5071, 0.4865, 0.4409],
            &[0.2673, 0.2564, 0.2762],
            (50_000, 10_000),
        )
    }

    pub fn tiny_imagenet() -> Self {
        Self::image("tinyimagenet", 3, 32, 200, &IMAGENET_MEAN, &IMAGENET_STD, (100_000, 10_000))
    }

    pub fn mini_imagenet() -> Self {
        Self::image("miniimagenet", 3, 32, 100, &IMAGENET_MEAN, &IMAGENET_STD, (50_000, 10_000))
    }

    pub fn features(name: &str, dim: usize, num_classes: usize, train: usize, test: usize) -> Self {
        Self {
            name: name.into(),
            input_dim: dim,
            num_classes,
            channels: 0,
            height: 0,
            width: 0,
            channel_means: Vec::new(),
            channel_stds: Vec::new(),
            train_count: train,
            test_count: test,
            input_norm: InputNorm::default(),
        }
    }

    pub fn is_image(&self) -> bool {
        self.channels > 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::Config(format!("dataset {} has empty dimensions", self.name)));
        }
        if self.train_count == 0 || self.test_count == 0 {
            return Err(Error::Config(format!("dataset {} has an empty split", self.name)));
        }
        if self.is_image() {
            if self.input_dim != self.channels * self.height * self.width {
                return Err(Error::Config("image shape disagrees with input_dim".into()));
            }
            if self.channel_means.len() != self.channels || self.channel_stds.len() != self.channels {
                return Err(Error::Config("need one mean and std per channel".into()));
            }
            if let Some(s) = self.channel_stds.iter().find(|s| !(**s > 0.0)) {
                return Err(Error::Config(format!("channel std must be positive, got {s}")));
            }
        }
        Ok(())
    }
}

const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];

/// `pixel/255`, then `(v − mean_c)/std_c` per channel, flattened channel-major.
pub fn normalize(image: &Image, desc: &DatasetDescriptor) -> Result<Vec<f32>> {
    if (image.channels, image.height, image.width) != (desc.channels, desc.height, desc.width) {
        return Err(Error::Data(format!(
            "image is {}×{}×{}, dataset {} expects {}×{}×{}",
            image.channels, image.height, image.width, desc.name, desc.channels, desc.height, desc.width
        )));
    }
    let plane = image.height * image.width;
    let mut out = Vec::with_capacity(image.pixels.len());
    for (c, chan) in image.pixels.chunks_exact(plane.max(1)).enumerate() {
        let mean = desc.channel_means[c];
        let std = desc.channel_stds[c];
        if !(std > 0.0) {
            return Err(Error::Config(format!("channel {c} has non-positive std {std}")));
        }
        out.extend(chan.iter().map(|&p| ((p as f64 / 255.0 - mean) / std) as f32));
    }
    Ok(out)
}

/// Turns a raw sample into the classifier's input vector: channel
/// normalization for images, then the descriptor's per-sample rescaling.
pub fn prepare(sample: &RawSample, desc: &DatasetDescriptor) -> Result<Vec<f32>> {
    let mut v = match sample {
        RawSample::Image(img) => normalize(img, desc)?,
        RawSample::Features(v) => {
            check_len(desc.input_dim, v.len())?;
            v.clone()
        }
    };
    desc.input_norm.apply(&mut v);
    Ok(v)
}

/// Named dataset kinds understood by [`load_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DatasetKind {
    Mnist,
    Cifar10,
    Cifar100,
    TinyImageNet,
    MiniImageNet,
    /// Precomputed features in `<dir>/<name>/{train,test}.rdfb`.
    Features(String),
}

impl DatasetKind {
    pub fn name(&self) -> String {
        match self {
            DatasetKind::Mnist => "mnist".into(),
            DatasetKind::Cifar10 => "cifar10".into(),
            DatasetKind::Cifar100 => "cifar100".into(),
            DatasetKind::TinyImageNet => "tinyimagenet".into(),
            DatasetKind::MiniImageNet => "miniimagenet".into(),
            DatasetKind::Features(n) => format!("features:{n}"),
        }
    }

    /// Ridge parameter that grows with dataset difficulty.
    pub fn default_lambda(&self) -> f64 {
        match self {
            DatasetKind::Mnist => 1e-6,
            DatasetKind::Cifar10 | DatasetKind::Cifar100 => 1e-5,
            DatasetKind::TinyImageNet | DatasetKind::MiniImageNet => 1e-4,
            DatasetKind::Features(_) => 1e-4,
        }
    }

    /// Color image datasets are flip-augmented by default.
    pub fn default_augment(&self) -> bool {
        !matches!(self, DatasetKind::Mnist | DatasetKind::Features(_))
    }

    fn subdirs(&self) -> Vec<String> {
        match self {
            DatasetKind::Cifar10 => vec!["cifar10".into(), "cifar-10-batches-bin".into()],
            DatasetKind::Cifar100 => vec!["cifar100".into(), "cifar-100-binary".into()],
            DatasetKind::Features(n) => vec![n.clone()],
            other => vec![other.name()],
        }
    }
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mnist" => DatasetKind::Mnist,
            "cifar10" => DatasetKind::Cifar10,
            "cifar100" => DatasetKind::Cifar100,
            "tinyimagenet" => DatasetKind::TinyImageNet,
            "miniimagenet" => DatasetKind::MiniImageNet,
            _ => match s.strip_prefix("features:") {
                Some(n) if !n.is_empty() => DatasetKind::Features(n.into()),
                _ => return Err(Error::Config(format!("unknown dataset '{s}'"))),
            },
        })
    }
}

impl TryFrom<String> for DatasetKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DatasetKind> for String {
    fn from(k: DatasetKind) -> String {
        k.name()
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub descriptor: DatasetDescriptor,
    pub train: Split,
    pub test: Split,
}

impl Dataset {
    /// Wraps in-memory splits, checking them against the descriptor.
    pub fn new(mut descriptor: DatasetDescriptor, train: Split, test: Split) -> Result<Self> {
        descriptor.train_count = train.len();
        descriptor.test_count = test.len();
        descriptor.validate()?;
        for split in [&train, &test] {
            check_len(split.labels.len(), split.samples.len())?;
            if let Some(&l) = split.labels.iter().find(|&&l| l as usize >= descriptor.num_classes) {
                return Err(Error::Data(format!(
                    "label {l} outside [0, {}) for dataset {}",
                    descriptor.num_classes, descriptor.name
                )));
            }
        }
        Ok(Self {
            descriptor,
            train,
            test,
        })
    }
}

fn resolve_dir(kind: &DatasetKind, data_dir: &Path) -> PathBuf {
    kind.subdirs()
        .into_iter()
        .map(|s| data_dir.join(s))
        .find(|p| p.is_dir())
        .unwrap_or_else(|| data_dir.to_path_buf())
}

fn require(path: PathBuf) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(Error::io(
            &path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
        ))
    }
}

/// Loads train and test splits from `data_dir` (or its conventional
/// per-dataset subdirectory):
///
/// * mnist: `{train,t10k}-{images-idx3,labels-idx1}-ubyte`
/// * cifar10: `data_batch_{1..5}.bin`, `test_batch.bin`
/// * cifar100: `train.bin`, `test.bin` (fine labels)
/// * tinyimagenet / miniimagenet: `train.bin`, `test.bin`, pre-downscaled
///   to 32×32 with single-byte labels
/// * features:NAME: `train.rdfb`, `test.rdfb`
pub fn load_dataset(kind: &DatasetKind, data_dir: &Path) -> Result<Dataset> {
    let dir = resolve_dir(kind, data_dir);
    match kind {
        DatasetKind::Mnist => {
            let (tr, trl) = load_idx(
                &require(dir.join("train-images-idx3-ubyte"))?,
                &require(dir.join("train-labels-idx1-ubyte"))?,
            )?;
            let (te, tel) = load_idx(
                &require(dir.join("t10k-images-idx3-ubyte"))?,
                &require(dir.join("t10k-labels-idx1-ubyte"))?,
            )?;
            Dataset::new(DatasetDescriptor::mnist(), Split::from_images(tr, trl), Split::from_images(te, tel))
        }
        DatasetKind::Cifar10 => {
            let mut train = Split::default();
            for b in 1..=5 {
                let (imgs, labels) =
                    load_cifar_binary(&require(dir.join(format!("data_batch_{b}.bin")))?, CifarLabels::Cifar10)?;
                let part = Split::from_images(imgs, labels);
                train.samples.extend(part.samples);
                train.labels.extend(part.labels);
            }
            let (te, tel) = load_cifar_binary(&require(dir.join("test_batch.bin"))?, CifarLabels::Cifar10)?;
            Dataset::new(DatasetDescriptor::cifar10(), train, Split::from_images(te, tel))
        }
        DatasetKind::Cifar100 | DatasetKind::TinyImageNet | DatasetKind::MiniImageNet => {
            let (desc, labels) = match kind {
                DatasetKind::Cifar100 => (DatasetDescriptor::cifar100(), CifarLabels::Cifar100Fine),
                DatasetKind::TinyImageNet => {
                    (DatasetDescriptor::tiny_imagenet(), CifarLabels::SingleByte { num_classes: 200 })
                }
                _ => (DatasetDescriptor::mini_imagenet(), CifarLabels::SingleByte { num_classes: 100 }),
            };
            let (tr, trl) = load_cifar_binary(&require(dir.join("train.bin"))?, labels)?;
            let (te, tel) = load_cifar_binary(&require(dir.join("test.bin"))?, labels)?;
            Dataset::new(desc, Split::from_images(tr, trl), Split::from_images(te, tel))
        }
        DatasetKind::Features(name) => {
            let train = load_feature_file(&require(dir.join("train.rdfb"))?)?;
            let test = load_feature_file(&require(dir.join("test.rdfb"))?)?;
            if train.dim != test.dim {
                return Err(Error::Data(format!(
                    "train dim {} differs from test dim {}",
                    train.dim, test.dim
                )));
            }
            let classes = train
                .labels
                .iter()
                .chain(&test.labels)
                .max()
                .map_or(0, |&m| m as usize + 1);
            let desc = DatasetDescriptor::features(name, train.dim, classes, train.len(), test.len());
            Dataset::new(desc, Split::from_features(train), Split::from_features(test))
        }
    }
}
