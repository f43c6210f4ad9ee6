//! Class-incremental streams and the one-pass benchmark protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifier::{FittedClassifier, ModelVariant, StreamingClassifier, Variant};
use crate::data_io::{
    flip_horizontal, prepare, Dataset, DatasetDescriptor, DatasetKind, InputNorm, LabeledSample, Origin, Split,
};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorMode, Normalizer};
use crate::feature_map::{EmbeddingSpec, FeatureMapSpec, RpSpec};
use crate::rng::SeededRng;

pub use crate::rng::GENERATOR_NAME;

/// Every knob of a run. Serializes to the JSON config file format; absent
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub data_dir: PathBuf,
    pub variant: Variant,
    pub embed_dim: usize,
    pub gamma: f64,
    /// Dataset default when unset.
    pub lambda: Option<f64>,
    pub seed: u64,
    /// Dataset default when unset.
    pub augment: Option<bool>,
    pub classes_per_task: usize,
    /// Identity order when unset.
    pub class_order: Option<Vec<u32>>,
    pub estimator_mode: EstimatorMode,
    pub normalizer: Normalizer,
    pub input_norm: InputNorm,
    /// Refit and evaluate on the seen classes every k stream steps.
    pub eval_every_k: Option<usize>,
    pub memory_cap_bytes: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Mnist,
            data_dir: PathBuf::from("data"),
            variant: Variant::Randumb,
            embed_dim: 25_000,
            gamma: 1.0,
            lambda: None,
            seed: 0,
            augment: None,
            classes_per_task: 1,
            class_order: None,
            estimator_mode: EstimatorMode::PooledWithinClass,
            normalizer: Normalizer::SamplesMinusOne,
            input_norm: InputNorm::UnitL2,
            eval_every_k: None,
            memory_cap_bytes: 16 << 30,
        }
    }
}

impl RunConfig {
    pub fn lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| self.dataset.default_lambda())
    }

    pub fn augment(&self) -> bool {
        self.augment.unwrap_or_else(|| self.dataset.default_augment())
    }

    /// Fills in dataset defaults so the echoed config is self-contained.
    pub fn resolved(&self) -> RunConfig {
        RunConfig {
            lambda: Some(self.lambda()),
            augment: Some(self.augment()),
            ..self.clone()
        }
    }

    pub fn model_variant(&self, input_dim: usize) -> Result<ModelVariant> {
        let embedding = match self.variant {
            Variant::Randumb | Variant::KernelNcm => Some(EmbeddingSpec::Fourier(FeatureMapSpec::from_embedding_size(
                input_dim,
                self.embed_dim,
                self.gamma,
                self.seed,
            )?)),
            Variant::RpRelu => Some(EmbeddingSpec::RandomRelu(RpSpec {
                input_dim,
                output_dim: self.embed_dim,
                seed: self.seed,
            })),
            Variant::Slda | Variant::Ncm => None,
        };
        let model = ModelVariant {
            variant: self.variant,
            embedding,
            lambda: self.lambda(),
            estimator_mode: self.estimator_mode,
            normalizer: self.normalizer,
        };
        model.validate()?;
        Ok(model)
    }

    /// The dataset descriptor with this run's input rescaling applied.
    pub fn descriptor(&self, dataset: &DatasetDescriptor) -> DatasetDescriptor {
        DatasetDescriptor {
            input_norm: self.input_norm,
            ..dataset.clone()
        }
    }

    pub fn stream_spec(&self, descriptor: &DatasetDescriptor) -> StreamSpec {
        StreamSpec {
            dataset: self.descriptor(descriptor),
            classes_per_task: self.classes_per_task,
            class_order: self
                .class_order
                .clone()
                .unwrap_or_else(|| (0..descriptor.num_classes as u32).collect()),
            augment: self.augment(),
            seed: self.seed,
        }
    }
}

/// Bytes the run is expected to hold at its peak: the `E × E` scatter that
/// is factored in place, the embedding weights, and per-class vectors.
pub fn peak_memory_estimate(model: &ModelVariant, input_dim: usize, num_classes: usize) -> u64 {
    let e = model.feature_dim(input_dim) as u64;
    let matrix = if model.variant.decorrelates() { 8 * e * e } else { 0 };
    let embedding = match model.embedding {
        Some(EmbeddingSpec::Fourier(s)) => 4 * (s.num_bases * s.input_dim) as u64,
        Some(EmbeddingSpec::RandomRelu(s)) => 4 * (s.output_dim * s.input_dim) as u64,
        None => 0,
    };
    // Class means plus discriminant weights.
    matrix + embedding + 16 * e * num_classes as u64
}

fn check_memory(model: &ModelVariant, input_dim: usize, cap: u64) -> Result<()> {
    if !model.variant.decorrelates() {
        return Ok(());
    }
    let e = model.feature_dim(input_dim) as u64;
    let needed = 8 * e * e;
    if needed > cap {
        return Err(Error::Config(format!(
            "embedding dimension {e} needs {needed} bytes (8·E²) for the covariance, above the cap of {cap} bytes; \
             lower --embed-dim or raise memory_cap_bytes"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub dataset: DatasetDescriptor,
    pub classes_per_task: usize,
    pub class_order: Vec<u32>,
    pub augment: bool,
    pub seed: u64,
}

impl StreamSpec {
    pub fn tasks(&self) -> Vec<Vec<u32>> {
        self.class_order
            .chunks(self.classes_per_task.max(1))
            .map(<[u32]>::to_vec)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.classes_per_task == 0 {
            return Err(Error::Config("classes_per_task must be positive".into()));
        }
        let expected: BTreeSet<u32> = (0..self.dataset.num_classes as u32).collect();
        let given: BTreeSet<u32> = self.class_order.iter().copied().collect();
        if given.len() != self.class_order.len() || given != expected {
            return Err(Error::Config(format!(
                "class order {:?} is not a permutation of 0..{}",
                self.class_order, self.dataset.num_classes
            )));
        }
        Ok(())
    }
}

/// Lazy class-incremental stream. Samples are normalized one at a time;
/// with augmentation each flipped copy follows its original.
pub struct Stream<'a> {
    split: &'a Split,
    descriptor: &'a DatasetDescriptor,
    order: Vec<usize>,
    augment: bool,
    cursor: usize,
    pending_flip: Option<usize>,
}

impl Stream<'_> {
    pub fn len(&self) -> usize {
        self.order.len() * if self.augment { 2 } else { 1 }
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

impl Iterator for Stream<'_> {
    type Item = Result<LabeledSample>;

    fn next(&mut self) -> Option<Self::Item> {
        let (index, origin) = match self.pending_flip.take() {
            Some(i) => (i, Origin::Flipped),
            None => {
                let i = *self.order.get(self.cursor)?;
                self.cursor += 1;
                if self.augment {
                    self.pending_flip = Some(i);
                }
                (i, Origin::Original)
            }
        };
        let raw = &self.split.samples[index];
        let features = match origin {
            Origin::Original => prepare(raw, self.descriptor),
            Origin::Flipped => flip_horizontal(raw).and_then(|f| prepare(&f, self.descriptor)),
        };
        Some(features.map(|features| LabeledSample {
            features,
            label: self.split.labels[index],
            origin,
        }))
    }
}

pub fn make_stream<'a>(spec: &'a StreamSpec, train: &'a Split) -> Result<Stream<'a>> {
    spec.validate()?;
    if spec.augment && !spec.dataset.is_image() {
        return Err(Error::UnsupportedAugmentation(format!(
            "dataset {} holds precomputed features and cannot be flipped",
            spec.dataset.name
        )));
    }
    let mut by_class: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &l) in train.labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = SeededRng::with_stream(spec.seed, 0x5354_5245_414d);
    let mut order = Vec::with_capacity(train.len());
    for task in spec.tasks() {
        let mut block = Vec::new();
        for c in &task {
            match by_class.get(c) {
                Some(idx) => block.extend_from_slice(idx),
                None => return Err(Error::Config(format!("class {c} has no training samples"))),
            }
        }
        rng.shuffle(&mut block);
        order.extend(block);
    }
    Ok(Stream {
        split: train,
        descriptor: &spec.dataset,
        order,
        augment: spec.augment,
        cursor: 0,
        pending_flip: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub per_class: BTreeMap<u32, f64>,
    /// Correct predictions over all predictions.
    pub average: f64,
    /// Unweighted mean of the per-class accuracies.
    pub class_average: f64,
}

pub fn compute_accuracy(predictions: &[u32], labels: &[u32]) -> Result<Accuracy> {
    crate::error::check_len(labels.len(), predictions.len())?;
    if labels.is_empty() {
        return Err(Error::InsufficientData("no predictions to score".into()));
    }
    let mut tally: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
    for (&p, &l) in predictions.iter().zip(labels) {
        let t = tally.entry(l).or_default();
        t.0 += usize::from(p == l);
        t.1 += 1;
    }
    let correct: usize = tally.values().map(|t| t.0).sum();
    let per_class: BTreeMap<u32, f64> = tally.iter().map(|(&c, &(k, n))| (c, k as f64 / n as f64)).collect();
    let class_average = per_class.values().sum::<f64>() / per_class.len() as f64;
    Ok(Accuracy {
        per_class,
        average: correct as f64 / labels.len() as f64,
        class_average,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub seen_classes: usize,
    pub average_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub generator: String,
    pub dataset: DatasetDescriptor,
    pub model: ModelVariant,
    pub feature_dim: usize,
    pub stream_length: usize,
    pub observe_calls: u64,
    pub test_count: usize,
    pub per_class_accuracy: BTreeMap<u32, f64>,
    pub average_accuracy: f64,
    pub class_average_accuracy: f64,
    pub shrinkage_rho: Option<f64>,
    pub train_seconds: f64,
    pub eval_seconds: f64,
    pub wall_time_seconds: f64,
    pub peak_memory_estimate_bytes: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curve: Vec<CurvePoint>,
}

/// Snapshot handed to a [`run_benchmark_with`] observer after every step.
#[derive(Debug, Clone, Copy)]
pub struct StepInfo {
    pub position: usize,
    pub label: u32,
    pub state_bytes: usize,
}

pub fn run_benchmark(config: &RunConfig, dataset: &Dataset) -> Result<RunResult> {
    run_benchmark_with(config, dataset, |_| {})
}

/// Runs the protocol, calling `on_step` after each observed sample.
pub fn run_benchmark_with(config: &RunConfig, dataset: &Dataset, mut on_step: impl FnMut(StepInfo)) -> Result<RunResult> {
    let started = Instant::now();
    let desc = &config.descriptor(&dataset.descriptor);
    let model_cfg = config.model_variant(desc.input_dim)?;
    check_memory(&model_cfg, desc.input_dim, config.memory_cap_bytes)?;
    if config.eval_every_k == Some(0) {
        return Err(Error::Config("eval_every_k must be positive".into()));
    }
    let spec = config.stream_spec(desc);
    let stream = make_stream(&spec, &dataset.train)?;
    let stream_length = stream.len();

    let mut model = StreamingClassifier::new(model_cfg.clone(), desc.input_dim)?;
    let mut seen = BTreeSet::new();
    let mut curve = Vec::new();
    let mut observe_calls = 0u64;
    for (position, sample) in stream.enumerate() {
        let sample = sample.map_err(|e| e.at_step(position))?;
        model.observe(&sample.features, sample.label).map_err(|e| e.at_step(position))?;
        observe_calls += 1;
        seen.insert(sample.label);
        on_step(StepInfo {
            position,
            label: sample.label,
            state_bytes: model.estimator().state_bytes(),
        });
        if let Some(k) = config.eval_every_k {
            if (position + 1) % k == 0 && position + 1 < stream_length {
                let fitted = model.fit().map_err(|e| e.at_step(position))?;
                let acc = evaluate(&fitted, dataset, desc, &seen)?;
                curve.push(CurvePoint {
                    step: position + 1,
                    seen_classes: seen.len(),
                    average_accuracy: acc.average,
                });
            }
        }
    }
    let fitted = model.into_fitted()?;
    let train_seconds = started.elapsed().as_secs_f64();

    let eval_start = Instant::now();
    let acc = evaluate(&fitted, dataset, desc, &seen)?;
    let eval_seconds = eval_start.elapsed().as_secs_f64();
    if config.eval_every_k.is_some() {
        curve.push(CurvePoint {
            step: stream_length,
            seen_classes: seen.len(),
            average_accuracy: acc.average,
        });
    }
    let test_count = dataset.test.labels.iter().filter(|l| seen.contains(l)).count();

    Ok(RunResult {
        config: config.resolved(),
        generator: GENERATOR_NAME.into(),
        dataset: desc.clone(),
        feature_dim: model_cfg.feature_dim(desc.input_dim),
        peak_memory_estimate_bytes: peak_memory_estimate(&model_cfg, desc.input_dim, desc.num_classes),
        model: model_cfg,
        stream_length,
        observe_calls,
        test_count,
        per_class_accuracy: acc.per_class,
        average_accuracy: acc.average,
        class_average_accuracy: acc.class_average,
        shrinkage_rho: fitted.shrinkage_rho(),
        train_seconds,
        eval_seconds,
        wall_time_seconds: started.elapsed().as_secs_f64(),
        curve,
    })
}

/// Scores the test samples whose class has been seen.
fn evaluate(model: &FittedClassifier, dataset: &Dataset, desc: &DatasetDescriptor, seen: &BTreeSet<u32>) -> Result<Accuracy> {
    let test = &dataset.test;
    let idx: Vec<usize> = (0..test.len()).filter(|&i| seen.contains(&test.labels[i])).collect();
    let predict = |&i: &usize| -> Result<u32> {
        let x = prepare(&test.samples[i], desc)?;
        model.predict(&x)
    };
    #[cfg(feature = "parallel")]
    let predictions: Vec<u32> = {
        use rayon::prelude::*;
        idx.par_iter().map(predict).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let predictions: Vec<u32> = idx.iter().map(predict).collect::<Result<_>>()?;
    let labels: Vec<u32> = idx.iter().map(|&i| test.labels[i]).collect();
    compute_accuracy(&predictions, &labels)
}

/// One run per embedding size, all sharing data and seed.
pub fn sweep_embedding(dims: &[usize], base: &RunConfig, dataset: &Dataset) -> Result<Vec<RunResult>> {
    if dims.is_empty() {
        return Err(Error::Config("sweep needs at least one embedding size".into()));
    }
    if let Some(d) = dims.iter().find(|&&d| d == 0 || d % 2 != 0) {
        return Err(Error::Config(format!("embedding size {d} must be positive and even")));
    }
    if dims.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config(format!("embedding sizes {dims:?} must be ascending")));
    }
    dims.iter()
        .map(|&embed_dim| {
            run_benchmark(
                &RunConfig {
                    embed_dim,
                    ..base.clone()
                },
                dataset,
            )
        })
        .collect()
}

/// The same stream through every classifier variant.
pub fn run_ablation(base: &RunConfig, dataset: &Dataset) -> Result<Vec<RunResult>> {
    Variant::ALL
        .iter()
        .map(|&variant| run_benchmark(&RunConfig { variant, ..base.clone() }, dataset))
        .collect()
}

/// Appends one JSON object per result.
pub fn append_json_lines(path: &Path, results: &[RunResult]) -> Result<()> {
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    for r in results {
        let line = serde_json::to_string(r).map_err(|e| Error::Data(format!("cannot serialize result: {e}")))?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub fn csv_table(results: &[RunResult]) -> String {
    let mut out = String::from(
        "dataset,variant,embed_dim,feature_dim,lambda,seed,augment,average_accuracy,class_average_accuracy,shrinkage_rho,wall_time_seconds\n",
    );
    for r in results {
        let c = &r.config;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.6},{:.6},{},{:.3}\n",
            csv_field(&c.dataset.name()),
            c.variant,
            c.embed_dim,
            r.feature_dim,
            c.lambda(),
            c.seed,
            c.augment(),
            r.average_accuracy,
            r.class_average_accuracy,
            r.shrinkage_rho.map_or(String::new(), |v| format!("{v:.6}")),
            r.wall_time_seconds,
        ));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{FeatureFile, RawSample};

    fn feature_dataset(dim: usize, per_class: &[usize], seed: u64) -> Dataset {
        let mut rng = SeededRng::new(seed);
        let mut split = |counts: &[usize]| {
            let mut vectors = Vec::new();
            let mut labels = Vec::new();
            for (c, &n) in counts.iter().enumerate() {
                for _ in 0..n {
                    vectors.extend((0..dim).map(|k| (if k == c { 3.0 } else { 0.0 } + rng.standard_normal()) as f32));
                    labels.push(c as u32);
                }
            }
            Split::from_features(FeatureFile::new(dim, vectors, labels).unwrap())
        };
        let train = split(per_class);
        let test = split(&per_class.iter().map(|n| n / 2).collect::<Vec<_>>());
        let desc = DatasetDescriptor::features("toy", dim, per_class.len(), 0, 0);
        Dataset::new(desc, train, test).unwrap()
    }

    fn toy_config(variant: Variant) -> RunConfig {
        RunConfig {
            dataset: DatasetKind::Features("toy".into()),
            variant,
            embed_dim: 64,
            lambda: Some(1e-4),
            ..RunConfig::default()
        }
    }

    #[test]
    fn accuracy_hand_count() {
        let a = compute_accuracy(&[0, 1, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(a.per_class[&0], 0.5);
        assert_eq!(a.per_class[&1], 1.0);
        assert_eq!(a.average, 0.75);
        assert_eq!(compute_accuracy(&[3, 4], &[3, 4]).unwrap().average, 1.0);
        assert!(compute_accuracy(&[], &[]).is_err());
        assert!(compute_accuracy(&[1], &[1, 2]).is_err());
    }

    #[test]
    fn shuffled_labels_score_near_chance() {
        let labels: Vec<u32> = (0..10_000).map(|i| (i % 10) as u32).collect();
        let mut preds = labels.clone();
        SeededRng::new(1).shuffle(&mut preds);
        let a = compute_accuracy(&preds, &labels).unwrap();
        assert!((a.average - 0.1).abs() < 0.015, "{}", a.average);
    }

    #[test]
    fn stream_is_class_incremental_and_deterministic() {
        let ds = feature_dataset(3, &[2, 2], 0);
        let spec = StreamSpec {
            dataset: ds.descriptor.clone(),
            classes_per_task: 1,
            class_order: vec![0, 1],
            augment: false,
            seed: 5,
        };
        let a: Vec<LabeledSample> = make_stream(&spec, &ds.train).unwrap().map(Result::unwrap).collect();
        let b: Vec<LabeledSample> = make_stream(&spec, &ds.train).unwrap().map(Result::unwrap).collect();
        assert_eq!(a, b);
        assert_eq!(a.iter().map(|s| s.label).collect::<Vec<_>>(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn ten_class_stream_has_ten_blocks() {
        let ds = feature_dataset(12, &[7; 10], 1);
        let order: Vec<u32> = vec![3, 1, 4, 0, 5, 9, 2, 6, 8, 7];
        let spec = StreamSpec {
            dataset: ds.descriptor.clone(),
            classes_per_task: 1,
            class_order: order.clone(),
            augment: false,
            seed: 0,
        };
        let labels: Vec<u32> = make_stream(&spec, &ds.train).unwrap().map(|s| s.unwrap().label).collect();
        let mut blocks: Vec<u32> = labels.clone();
        blocks.dedup();
        assert_eq!(blocks, order);
        assert_eq!(labels.len(), 70);
    }

    #[test]
    fn stream_rejects_bad_orders() {
        let ds = feature_dataset(3, &[2, 2], 0);
        let mut spec = StreamSpec {
            dataset: ds.descriptor.clone(),
            classes_per_task: 1,
            class_order: vec![0, 0],
            augment: false,
            seed: 0,
        };
        assert_eq!(make_stream(&spec, &ds.train).err().unwrap().exit_code(), 2);
        spec.class_order = vec![0, 1, 2];
        assert!(make_stream(&spec, &ds.train).is_err());
        spec.class_order = vec![1, 0];
        spec.augment = true;
        assert!(matches!(
            make_stream(&spec, &ds.train).err().unwrap(),
            Error::UnsupportedAugmentation(_)
        ));
    }

    #[test]
    fn missing_train_class_is_config_error() {
        let ds = feature_dataset(3, &[2, 2], 0);
        let mut train = ds.train.clone();
        train.samples.truncate(2);
        train.labels.truncate(2);
        let spec = StreamSpec {
            dataset: ds.descriptor.clone(),
            classes_per_task: 1,
            class_order: vec![0, 1],
            augment: false,
            seed: 0,
        };
        let err = make_stream(&spec, &train).err().unwrap();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn flipped_copy_follows_original() {
        let img = crate::data_io::Image::new(1, 1, 2, vec![10, 200]).unwrap();
        let train = Split::from_images(vec![img.clone(), img], vec![0, 1]);
        let mut desc = DatasetDescriptor::mnist();
        desc.input_dim = 2;
        desc.height = 1;
        desc.width = 2;
        desc.num_classes = 2;
        let spec = StreamSpec {
            dataset: desc,
            classes_per_task: 2,
            class_order: vec![0, 1],
            augment: true,
            seed: 0,
        };
        let s: Vec<LabeledSample> = make_stream(&spec, &train).unwrap().map(Result::unwrap).collect();
        assert_eq!(s.len(), 4);
        for pair in s.chunks(2) {
            assert_eq!(pair[0].origin, Origin::Original);
            assert_eq!(pair[1].origin, Origin::Flipped);
            assert_eq!(pair[0].label, pair[1].label);
            assert_eq!(pair[0].features[0], pair[1].features[1]);
        }
    }

    #[test]
    fn single_class_ncm_is_perfect() {
        let ds = feature_dataset(4, &[6], 2);
        let r = run_benchmark(&toy_config(Variant::Ncm), &ds).unwrap();
        assert_eq!(r.per_class_accuracy[&0], 1.0);
        assert_eq!(r.average_accuracy, 1.0);
    }

    #[test]
    fn observe_once_per_element() {
        let ds = feature_dataset(5, &[20, 30, 25], 3);
        let mut steps = 0;
        let r = run_benchmark_with(&toy_config(Variant::Randumb), &ds, |_| steps += 1).unwrap();
        assert_eq!(r.observe_calls, 75);
        assert_eq!(r.stream_length, 75);
        assert_eq!(steps, 75);
        assert!(r.average_accuracy > 0.5);
        assert!(r.shrinkage_rho.is_some());
    }

    #[test]
    fn runs_are_deterministic_and_order_robust() {
        let ds = feature_dataset(6, &[40, 40, 40], 4);
        let cfg = toy_config(Variant::Randumb);
        let a = run_benchmark(&cfg, &ds).unwrap();
        let b = run_benchmark(&cfg, &ds).unwrap();
        assert_eq!(a.per_class_accuracy, b.per_class_accuracy);
        assert_eq!(a.average_accuracy.to_bits(), b.average_accuracy.to_bits());
        let c = run_benchmark(
            &RunConfig {
                class_order: Some(vec![2, 0, 1]),
                ..cfg
            },
            &ds,
        )
        .unwrap();
        assert!((a.average_accuracy - c.average_accuracy).abs() < 1e-6);
    }

    #[test]
    fn memory_cap_refuses_large_embeddings() {
        let ds = feature_dataset(3, &[2, 2], 0);
        let cfg = RunConfig {
            memory_cap_bytes: 1000,
            ..toy_config(Variant::Randumb)
        };
        let err = run_benchmark(&cfg, &ds).unwrap_err();
        assert!(err.to_string().contains("32768 bytes"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn step_errors_carry_position() {
        let mut ds = feature_dataset(2, &[3, 3], 0);
        ds.train.samples[4] = RawSample::Features(vec![f32::NAN, 0.0]);
        let err = run_benchmark(&toy_config(Variant::Randumb), &ds).unwrap_err();
        assert!(matches!(err, Error::AtStep { .. }), "{err}");
    }

    #[test]
    fn sweep_validates_dims_and_repeats_identically() {
        let ds = feature_dataset(4, &[15, 15], 6);
        let base = toy_config(Variant::Randumb);
        assert!(sweep_embedding(&[10, 7], &base, &ds).is_err());
        assert!(sweep_embedding(&[20, 10], &base, &ds).is_err());
        let r = sweep_embedding(&[20, 20], &base, &ds).unwrap();
        assert_eq!(r[0].per_class_accuracy, r[1].per_class_accuracy);
    }

    #[test]
    fn ablation_covers_all_variants_and_tabulates() {
        let ds = feature_dataset(4, &[15, 15], 7);
        let results = run_ablation(&toy_config(Variant::Randumb), &ds).unwrap();
        let names: Vec<Variant> = results.iter().map(|r| r.config.variant).collect();
        assert_eq!(names, Variant::ALL);
        let table = csv_table(&results);
        assert_eq!(table.lines().count(), 6);
        assert!(table.lines().nth(1).unwrap().starts_with("features:toy,randumb,64,64,"));
    }

    #[test]
    fn curve_ends_at_final_accuracy() {
        let ds = feature_dataset(4, &[10, 10], 8);
        let cfg = RunConfig {
            eval_every_k: Some(5),
            ..toy_config(Variant::Slda)
        };
        let r = run_benchmark(&cfg, &ds).unwrap();
        assert_eq!(r.curve.len(), 4);
        assert_eq!(r.curve.last().unwrap().average_accuracy, r.average_accuracy);
        assert_eq!(r.curve[0].seen_classes, 1);
    }

    #[test]
    fn config_json_round_trip_and_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"dataset":"cifar10","embed_dim":2000}"#).unwrap();
        assert_eq!(cfg.dataset, DatasetKind::Cifar10);
        assert_eq!(cfg.lambda(), 1e-5);
        assert!(cfg.augment());
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn results_append_as_json_lines() {
        let ds = feature_dataset(3, &[5, 5], 9);
        let r = run_benchmark(&toy_config(Variant::Ncm), &ds).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.jsonl");
        append_json_lines(&path, &[r.clone()]).unwrap();
        append_json_lines(&path, &[r]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        let parsed: RunResult = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(parsed.generator, GENERATOR_NAME);
    }
}
