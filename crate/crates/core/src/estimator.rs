//! Exact one-sample-at-a-time class means and covariance.
//!
//! A single `E × E` scatter accumulator holds either the pooled
//! within-class scatter or the global scatter. For a sample `x` of class
//! `c` with pre-update count `n_c` and mean `μ_c`, the pooled update is
//!
//! ```text
//! scatter += n_c / (n_c + 1) · (x − μ_c)(x − μ_c)ᵀ
//! μ_c     += (x − μ_c) / (n_c + 1)
//! ```
//!
//! which telescopes to `Σ_c Σ_{x∈c} (x − μ̄_c)(x − μ̄_c)ᵀ` after any number
//! of steps, in any order. Global mode applies the same rule with the
//! grand mean. Only the upper triangle is written during updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    #[default]
    PooledWithinClass,
    Global,
}

/// Divisor applied to the scatter matrix when forming the covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// `n − 1`
    #[default]
    SamplesMinusOne,
    /// `n − C`, the unbiased pooled estimate.
    SamplesMinusClasses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class_id: u32,
    pub count: u64,
    pub mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterAccumulator {
    pub total_count: u64,
    /// Upper triangle is authoritative; see [`Matrix::mirror_upper`].
    pub scatter: Matrix,
    pub mode: EstimatorMode,
}

#[derive(Debug, Clone)]
pub struct StreamingEstimator {
    dim: usize,
    normalizer: Normalizer,
    classes: BTreeMap<u32, ClassStats>,
    global_mean: Vec<f64>,
    /// `None` when only class means are tracked.
    scatter: Option<ScatterAccumulator>,
    total_count: u64,
    delta: Vec<f64>,
}

impl StreamingEstimator {
    pub fn new(dim: usize, mode: EstimatorMode, normalizer: Normalizer) -> Self {
        Self {
            dim,
            normalizer,
            classes: BTreeMap::new(),
            global_mean: vec![0.0; dim],
            scatter: Some(ScatterAccumulator {
                total_count: 0,
                scatter: Matrix::zeros(dim),
                mode,
            }),
            total_count: 0,
            delta: vec![0.0; dim],
        }
    }

    /// Tracks counts and class means only; for classifiers that never
    /// decorrelate and should not pay for an `E × E` matrix.
    pub fn means_only(dim: usize) -> Self {
        Self {
            dim,
            normalizer: Normalizer::default(),
            classes: BTreeMap::new(),
            global_mean: vec![0.0; dim],
            scatter: None,
            total_count: 0,
            delta: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mode(&self) -> Option<EstimatorMode> {
        self.scatter.as_ref().map(|s| s.mode)
    }

    pub fn normalizer(&self) -> Normalizer {
        self.normalizer
    }

    pub fn total_count(&self) -> u64 {
        self.total_count
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn tracks_scatter(&self) -> bool {
        self.scatter.is_some()
    }

    pub fn class_stats(&self) -> impl Iterator<Item = &ClassStats> {
        self.classes.values()
    }

    pub fn scatter(&self) -> Option<&ScatterAccumulator> {
        self.scatter.as_ref()
    }

    pub fn observe<T: Copy + Into<f64>>(&mut self, phi: &[T], label: u32) -> Result<()> {
        check_len(self.dim, phi.len())?;
        if phi.iter().any(|&v| !v.into().is_finite()) {
            return Err(Error::Data(format!("non-finite value in sample of class {label}")));
        }
        let dim = self.dim;
        let class = self.classes.entry(label).or_insert_with(|| ClassStats {
            class_id: label,
            count: 0,
            mean: vec![0.0; dim],
        });

        let (center, prior) = match self.scatter.as_ref().map(|s| s.mode) {
            Some(EstimatorMode::Global) => (&self.global_mean, self.total_count),
            _ => (&class.mean, class.count),
        };
        for ((d, &x), m) in self.delta.iter_mut().zip(phi).zip(center) {
            *d = x.into() - m;
        }
        if let Some(acc) = self.scatter.as_mut() {
            if prior > 0 {
                let weight = prior as f64 / (prior as f64 + 1.0);
                rank_one_upper(&mut acc.scatter, weight, &self.delta);
            }
            acc.total_count += 1;
        }

        // Running means; in pooled mode `delta` already holds x − μ_c.
        let inv = 1.0 / (class.count as f64 + 1.0);
        for (m, &x) in class.mean.iter_mut().zip(phi) {
            *m += (x.into() - *m) * inv;
        }
        class.count += 1;
        let inv = 1.0 / (self.total_count as f64 + 1.0);
        for (m, &x) in self.global_mean.iter_mut().zip(phi) {
            *m += (x.into() - *m) * inv;
        }
        self.total_count += 1;
        Ok(())
    }

    pub fn class_means(&self) -> BTreeMap<u32, Vec<f64>> {
        self.classes
            .iter()
            .map(|(&k, v)| (k, v.mean.clone()))
            .collect()
    }

    pub fn global_mean(&self) -> &[f64] {
        &self.global_mean
    }

    fn divisor(&self) -> Result<f64> {
        let n = self.total_count;
        let d = match self.normalizer {
            Normalizer::SamplesMinusOne => n.saturating_sub(1),
            Normalizer::SamplesMinusClasses => n.saturating_sub(self.classes.len() as u64),
        };
        if n < 2 || d == 0 {
            return Err(Error::InsufficientData(format!(
                "covariance needs more samples ({n} observed over {} classes)",
                self.classes.len()
            )));
        }
        Ok(d as f64)
    }

    /// Symmetric covariance `scatter / (n − 1)` (or `n − C`).
    pub fn covariance(&self) -> Result<Matrix> {
        let acc = self.scatter.as_ref().ok_or_else(|| {
            Error::Config("estimator was built without a scatter accumulator".into())
        })?;
        let divisor = self.divisor()?;
        let mut cov = acc.scatter.clone();
        finish_covariance(&mut cov, divisor);
        Ok(cov)
    }

    /// Like [`covariance`](Self::covariance) but reuses the scatter storage.
    /// Returns the covariance, the class means and the total count.
    pub fn into_covariance(mut self) -> Result<(Matrix, BTreeMap<u32, Vec<f64>>, u64)> {
        let divisor = self.divisor()?;
        let acc = self.scatter.take().ok_or_else(|| {
            Error::Config("estimator was built without a scatter accumulator".into())
        })?;
        let means = self.class_means();
        let mut cov = acc.scatter;
        finish_covariance(&mut cov, divisor);
        Ok((cov, means, self.total_count))
    }

    /// Bytes held by the estimator state. Grows only when a new class
    /// appears; independent of how many samples have been observed.
    pub fn state_bytes(&self) -> usize {
        let per_class = self
            .classes
            .values()
            .map(|c| std::mem::size_of::<ClassStats>() + c.mean.capacity() * 8)
            .sum::<usize>();
        std::mem::size_of::<Self>()
            + per_class
            + (self.global_mean.capacity() + self.delta.capacity()) * 8
            + self.scatter.as_ref().map_or(0, |s| s.scatter.heap_bytes())
    }

    /// Reassembles an estimator from checkpointed parts.
    pub fn from_parts(
        dim: usize,
        normalizer: Normalizer,
        classes: Vec<ClassStats>,
        scatter: Option<ScatterAccumulator>,
        global_mean: Vec<f64>,
    ) -> Result<Self> {
        check_len(dim, global_mean.len())?;
        let mut map = BTreeMap::new();
        let mut total = 0u64;
        for c in classes {
            check_len(dim, c.mean.len())?;
            total += c.count;
            if map.insert(c.class_id, c).is_some() {
                return Err(Error::Data("duplicate class in checkpoint".into()));
            }
        }
        if let Some(acc) = &scatter {
            check_len(dim, acc.scatter.dim())?;
            if acc.total_count != total {
                return Err(Error::Data(format!(
                    "checkpoint scatter count {} disagrees with class counts {total}",
                    acc.total_count
                )));
            }
        }
        Ok(Self {
            dim,
            normalizer,
            classes: map,
            global_mean,
            scatter,
            total_count: total,
            delta: vec![0.0; dim],
        })
    }
}

fn finish_covariance(scatter: &mut Matrix, divisor: f64) {
    scatter.mirror_upper();
    scatter.scale(1.0 / divisor);
}

/// `A[i][j] += w · v_i · v_j` for `j ≥ i`.
fn rank_one_upper(a: &mut Matrix, weight: f64, v: &[f64]) {
    for (i, &vi) in v.iter().enumerate() {
        let s = weight * vi;
        if s == 0.0 {
            continue;
        }
        let row = &mut a.row_mut(i)[i..];
        for (r, &vj) in row.iter_mut().zip(&v[i..]) {
            *r += s * vj;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn pooled(dim: usize) -> StreamingEstimator {
        StreamingEstimator::new(dim, EstimatorMode::PooledWithinClass, Normalizer::SamplesMinusOne)
    }

    /// Two-pass reference kept local so these unit tests do not depend on
    /// the oracle module.
    fn two_pass(samples: &[(Vec<f64>, u32)], dim: usize) -> Matrix {
        let mut means: BTreeMap<u32, (Vec<f64>, f64)> = BTreeMap::new();
        for (x, c) in samples {
            let e = means.entry(*c).or_insert((vec![0.0; dim], 0.0));
            e.1 += 1.0;
            for (m, v) in e.0.iter_mut().zip(x) {
                *m += v;
            }
        }
        for (m, n) in means.values_mut() {
            m.iter_mut().for_each(|v| *v /= *n);
        }
        let mut s = Matrix::zeros(dim);
        for (x, c) in samples {
            let m = &means[c].0;
            for i in 0..dim {
                for j in 0..dim {
                    s[(i, j)] += (x[i] - m[i]) * (x[j] - m[j]);
                }
            }
        }
        s
    }

    #[test]
    fn single_sample() {
        let mut est = pooled(3);
        est.observe(&[1.0, 2.0, 3.0], 0).unwrap();
        assert_eq!(est.class_means()[&0], vec![1.0, 2.0, 3.0]);
        assert_eq!(est.scatter().unwrap().scatter, Matrix::zeros(3));
        assert_eq!(est.total_count(), 1);
        assert!(matches!(est.covariance(), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn identical_samples_have_no_scatter() {
        let mut est = pooled(2);
        est.observe(&[0.5f32, -0.5], 4).unwrap();
        est.observe(&[0.5f32, -0.5], 4).unwrap();
        let cov = est.covariance().unwrap();
        assert_eq!(cov.max_abs(), 0.0);
        assert_eq!(est.class_means()[&4], vec![0.5, -0.5]);
    }

    #[test]
    fn two_point_closed_form() {
        let v = [1.0, -2.0, 0.5];
        let w = [3.0, 1.0, -0.5];
        let mut est = pooled(3);
        est.observe(&v, 1).unwrap();
        est.observe(&w, 1).unwrap();
        // Two points: S = (v−m)(v−m)ᵀ + (w−m)(w−m)ᵀ = ½(v−w)(v−w)ᵀ, over n−1 = 1.
        let cov = est.covariance().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = 0.5 * (v[i] - w[i]) * (v[j] - w[j]);
                assert!((cov[(i, j)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pooled_scatter_matches_two_pass() {
        let mut rng = SeededRng::new(21);
        let dim = 6;
        let samples: Vec<(Vec<f64>, u32)> = (0..500)
            .map(|_| {
                let c = rng.below(5) as u32;
                let x = (0..dim).map(|k| rng.standard_normal() + (c as f64) * (k as f64)).collect();
                (x, c)
            })
            .collect();
        let mut est = pooled(dim);
        for (x, c) in &samples {
            est.observe(x, *c).unwrap();
        }
        let mut got = est.scatter().unwrap().scatter.clone();
        got.mirror_upper();
        let want = two_pass(&samples, dim);
        let scale = want.max_abs();
        for i in 0..dim {
            for j in 0..dim {
                assert!((got[(i, j)] - want[(i, j)]).abs() / scale < 1e-10);
            }
        }
    }

    #[test]
    fn global_mode_centers_on_grand_mean() {
        let mut est = StreamingEstimator::new(1, EstimatorMode::Global, Normalizer::SamplesMinusOne);
        for (x, c) in [(0.0, 0), (2.0, 1), (4.0, 2)] {
            est.observe(&[x], c).unwrap();
        }
        // Sample variance of {0, 2, 4} is 4.
        assert!((est.covariance().unwrap()[(0, 0)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn pooled_unbiased_normalizer() {
        let mut est =
            StreamingEstimator::new(1, EstimatorMode::PooledWithinClass, Normalizer::SamplesMinusClasses);
        for (x, c) in [(0.0, 0), (2.0, 0), (10.0, 1), (14.0, 1)] {
            est.observe(&[x], c).unwrap();
        }
        // Scatter = 2 + 8 = 10, over n − C = 2.
        assert!((est.covariance().unwrap()[(0, 0)] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn standard_normal_covariance_is_identity() {
        let mut rng = SeededRng::new(5);
        let mut est = pooled(8);
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..8).map(|_| rng.standard_normal()).collect();
            est.observe(&x, 0).unwrap();
        }
        let cov = est.covariance().unwrap();
        let identity = Matrix::identity(8);
        for i in 0..8 {
            for j in 0..8 {
                assert!((cov[(i, j)] - identity[(i, j)]).abs() < 0.1);
            }
        }
    }

    #[test]
    fn reversed_stream_gives_same_covariance() {
        let mut rng = SeededRng::new(77);
        let data: Vec<(Vec<f64>, u32)> = (0..300)
            .map(|_| ((0..5).map(|_| rng.standard_normal()).collect(), rng.below(3) as u32))
            .collect();
        let mut fwd = pooled(5);
        let mut rev = pooled(5);
        for (x, c) in &data {
            fwd.observe(x, *c).unwrap();
        }
        for (x, c) in data.iter().rev() {
            rev.observe(x, *c).unwrap();
        }
        let a = fwd.covariance().unwrap();
        let b = rev.covariance().unwrap();
        let scale = a.max_abs();
        for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((p - q).abs() / scale < 1e-10);
        }
    }

    #[test]
    fn keys_are_exactly_observed_labels() {
        let mut est = pooled(2);
        est.observe(&[1.0, 0.0], 7).unwrap();
        est.observe(&[0.0, 1.0], 3).unwrap();
        let keys: Vec<u32> = est.class_means().into_keys().collect();
        assert_eq!(keys, vec![3, 7]);
        assert_eq!(est.class_means()[&7], vec![1.0, 0.0]);
        assert!(pooled(2).class_means().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        let mut est = pooled(3);
        assert!(matches!(est.observe(&[1.0, 2.0], 0), Err(Error::Shape { .. })));
        assert!(matches!(est.observe(&[1.0, f64::INFINITY, 0.0], 0), Err(Error::Data(_))));
        assert_eq!(est.total_count(), 0);
    }

    #[test]
    fn state_size_does_not_grow_with_samples() {
        let mut est = pooled(4);
        est.observe(&[0.0; 4], 0).unwrap();
        est.observe(&[1.0; 4], 1).unwrap();
        let before = est.state_bytes();
        for k in 0..1000 {
            est.observe(&[k as f64; 4], (k % 2) as u32).unwrap();
        }
        assert_eq!(est.state_bytes(), before);
    }

    #[test]
    fn means_only_has_no_covariance() {
        let mut est = StreamingEstimator::means_only(2);
        est.observe(&[1.0, 1.0], 0).unwrap();
        est.observe(&[3.0, 1.0], 0).unwrap();
        assert_eq!(est.class_means()[&0], vec![2.0, 1.0]);
        assert!(est.covariance().is_err());
        assert!(est.state_bytes() < 200 + 4 * 8 * 3);
    }
}
