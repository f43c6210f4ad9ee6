use std::collections::BTreeMap;

use proptest::prelude::*;
use randumb::bench::compute_accuracy;
use randumb::data_io::checkpoint::{decode_estimator, encode_estimator};
use randumb::oracle::batch_stats;
use randumb::{
    build_precision, oas_shrink, Embed, EstimatorMode, FeatureMap, FeatureMapSpec, ModelVariant, Normalizer,
    StreamingClassifier, StreamingEstimator, Variant,
};

fn stream(max_dim: usize, max_n: usize) -> impl Strategy<Value = (usize, Vec<(Vec<f64>, u32)>)> {
    (1..=max_dim, 2..=max_n, 1u32..=6).prop_flat_map(|(dim, n, classes)| {
        let sample = (prop::collection::vec(-10.0f64..10.0, dim), 0..classes);
        (Just(dim), prop::collection::vec(sample, n))
    })
}

fn mode() -> impl Strategy<Value = EstimatorMode> {
    prop_oneof![Just(EstimatorMode::PooledWithinClass), Just(EstimatorMode::Global)]
}

fn fill(dim: usize, mode: EstimatorMode, samples: &[(Vec<f64>, u32)]) -> StreamingEstimator {
    let mut est = StreamingEstimator::new(dim, mode, Normalizer::SamplesMinusOne);
    for (x, c) in samples {
        est.observe(x, *c).unwrap();
    }
    est
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn embeddings_have_unit_norm(
        x in prop::collection::vec(-50.0f32..50.0, 1..24),
        bases in 1usize..300,
        gamma in 0.01f64..5.0,
        seed in any::<u64>(),
    ) {
        let map = FeatureMap::sample(FeatureMapSpec { input_dim: x.len(), num_bases: bases, gamma, seed }).unwrap();
        let phi = map.embed(&x).unwrap();
        prop_assert_eq!(phi.len(), 2 * bases);
        let norm: f64 = phi.iter().map(|&v| v as f64 * v as f64).sum();
        prop_assert!((norm - 1.0).abs() < 1e-6, "norm² = {}", norm);
        prop_assert_eq!(map.embed(&x).unwrap(), phi);
    }

    #[test]
    fn streaming_matches_batch((dim, samples) in stream(8, 120), mode in mode()) {
        let est = fill(dim, mode, &samples);
        let (xs, labels): (Vec<Vec<f64>>, Vec<u32>) = samples.iter().cloned().unzip();
        let batch = batch_stats(&xs, &labels, mode);
        let cov = est.covariance().unwrap();
        let flat: Vec<f64> = batch.covariance.iter().flatten().copied().collect();
        prop_assert!(rel_err(cov.as_slice(), &flat) < 1e-10);
        for (c, m) in est.class_means() {
            prop_assert!(rel_err(&m, &batch.means[&c]) < 1e-10);
            prop_assert_eq!(est.class_stats().find(|s| s.class_id == c).unwrap().count as usize, batch.counts[&c]);
        }
    }

    #[test]
    fn covariance_is_symmetric_and_psd(
        (dim, samples) in stream(8, 80),
        mode in mode(),
        probe in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let cov = fill(dim, mode, &samples).covariance().unwrap();
        prop_assert_eq!(cov.max_asymmetry(), 0.0);
        let v = &probe[..dim];
        let q: f64 = cov.mul_vec(v).unwrap().iter().zip(v).map(|(a, b)| a * b).sum();
        prop_assert!(q >= -1e-9 * cov.trace().max(1.0), "vᵀSv = {}", q);
    }

    #[test]
    fn statistics_ignore_stream_order((dim, samples) in stream(6, 80), mode in mode(), seed in any::<u64>()) {
        let a = fill(dim, mode, &samples);
        let mut shuffled = samples.clone();
        randumb::rng::SeededRng::new(seed).shuffle(&mut shuffled);
        let b = fill(dim, mode, &shuffled);
        prop_assert!(rel_err(b.covariance().unwrap().as_slice(), a.covariance().unwrap().as_slice()) < 1e-8);
        let (ma, mb) = (a.class_means(), b.class_means());
        for (c, m) in &ma {
            prop_assert!(rel_err(&mb[c], m) < 1e-8);
        }
    }

    #[test]
    fn checkpoint_resume_equals_uninterrupted((dim, samples) in stream(6, 60), mode in mode(), cut in 0.0f64..1.0) {
        let k = (cut * samples.len() as f64) as usize;
        let first = fill(dim, mode, &samples[..k]);
        let mut resumed = decode_estimator(&encode_estimator(&first).unwrap()).unwrap();
        for (x, c) in &samples[k..] {
            resumed.observe(x, *c).unwrap();
        }
        let whole = fill(dim, mode, &samples);
        prop_assert_eq!(resumed.covariance().unwrap(), whole.covariance().unwrap());
        prop_assert_eq!(resumed.class_means(), whole.class_means());
    }

    #[test]
    fn oas_bounds_and_trace((dim, samples) in stream(8, 60)) {
        let est = fill(dim, EstimatorMode::PooledWithinClass, &samples);
        let cov = est.covariance().unwrap();
        let trace = cov.trace();
        let r = oas_shrink(cov, est.total_count()).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.rho));
        prop_assert!((r.shrunk.trace() - trace).abs() <= 1e-9 * trace.max(1.0));
        prop_assert!((r.mu - trace / dim as f64).abs() <= 1e-12 * trace.max(1.0));
    }

    #[test]
    fn larger_ridge_never_increases_distance(
        (dim, samples) in stream(6, 40),
        delta in prop::collection::vec(-3.0f64..3.0, 6),
        l1 in 1e-6f64..1.0,
        extra in 1e-6f64..10.0,
    ) {
        let est = fill(dim, EstimatorMode::PooledWithinClass, &samples);
        let shrunk = oas_shrink(est.covariance().unwrap(), est.total_count()).unwrap().shrunk;
        let a = build_precision(shrunk.clone(), l1).unwrap().mahalanobis_sq(&delta[..dim]).unwrap();
        let b = build_precision(shrunk, l1 + extra).unwrap().mahalanobis_sq(&delta[..dim]).unwrap();
        prop_assert!(b <= a * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn predict_is_extremum_of_scores(
        data in prop::collection::vec((prop::collection::vec(-2.0f32..2.0, 3), 0u32..4), 8..60),
        queries in prop::collection::vec(prop::collection::vec(-3.0f32..3.0, 3), 1..20),
        decorrelate in any::<bool>(),
    ) {
        let variant = if decorrelate { Variant::Slda } else { Variant::Ncm };
        let cfg = ModelVariant {
            variant,
            embedding: None,
            lambda: 1e-3,
            estimator_mode: EstimatorMode::PooledWithinClass,
            normalizer: Normalizer::SamplesMinusOne,
        };
        let mut model = StreamingClassifier::new(cfg, 3).unwrap();
        for (x, c) in &data {
            model.observe(x, *c).unwrap();
        }
        let fitted = model.into_fitted().unwrap();
        for q in &queries {
            let scores = fitted.scores(q).unwrap();
            let best = if fitted.minimizes() {
                scores.iter().min_by(|a, b| a.1.total_cmp(b.1)).unwrap()
            } else {
                scores.iter().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(a.0))).unwrap()
            };
            let predicted = fitted.predict(q).unwrap();
            // The linear form and the full distance may order near-ties
            // differently by a few ulps.
            let gap = (scores[&predicted] - best.1).abs();
            prop_assert!(predicted == *best.0 || gap <= 1e-9 * best.1.abs().max(1.0),
                "predicted {} vs {} (gap {})", predicted, best.0, gap);
        }
    }

    #[test]
    fn accuracy_is_consistent_with_class_counts(
        pairs in prop::collection::vec((0u32..5, 0u32..5), 1..200),
    ) {
        let (preds, labels): (Vec<u32>, Vec<u32>) = pairs.iter().copied().unzip();
        let acc = compute_accuracy(&preds, &labels).unwrap();
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for l in &labels {
            *counts.entry(*l).or_default() += 1;
        }
        let weighted: f64 = acc.per_class.iter().map(|(c, a)| a * counts[c] as f64).sum();
        prop_assert!((weighted / labels.len() as f64 - acc.average).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&acc.average));
    }
}

#[test]
fn duplicate_means_tie_to_smallest_label() {
    for variant in [Variant::Slda, Variant::Ncm] {
        let cfg = ModelVariant {
            variant,
            embedding: None,
            lambda: 1e-2,
            estimator_mode: EstimatorMode::PooledWithinClass,
            normalizer: Normalizer::SamplesMinusOne,
        };
        let mut model = StreamingClassifier::new(cfg, 2).unwrap();
        for label in [7, 3, 5] {
            model.observe(&[1.0, 2.0], label).unwrap();
            model.observe(&[2.0, 1.0], label).unwrap();
        }
        let fitted = model.into_fitted().unwrap();
        for q in [[0.0, 0.0], [1.5, 1.5], [-4.0, 9.0]] {
            assert_eq!(fitted.predict(&q).unwrap(), 3, "{variant}");
        }
    }
}

#[test]
fn mean_scores_itself_at_zero_distance() {
    let cfg = ModelVariant {
        variant: Variant::Slda,
        embedding: None,
        lambda: 1e-3,
        estimator_mode: EstimatorMode::PooledWithinClass,
        normalizer: Normalizer::SamplesMinusOne,
    };
    let mut model = StreamingClassifier::new(cfg, 2).unwrap();
    for (x, c) in [([0.0f32, 1.0], 0), ([1.0, 0.0], 0), ([4.0, 4.0], 1), ([5.0, 3.0], 1)] {
        model.observe(&x, c).unwrap();
    }
    let fitted = model.into_fitted().unwrap();
    let s = fitted.scores(&[0.5, 0.5]).unwrap();
    assert!(s[&0].abs() < 1e-12);
    assert!(s[&1] > 0.0);
}
