//! Brute-force references and the verification suite.
//!
//! The reference functions work on plain `Vec<Vec<f64>>` and are written
//! straight from the definitions: two-pass batch statistics, Gauss–Jordan
//! inverses, explicit matrix products. They never call into the streaming,
//! shrinkage or factorization code they are used to check. The
//! `check_*` functions pair each reference with the production path and
//! report the worst disagreement as an [`OracleReport`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classifier::{ModelVariant, StreamingClassifier, Variant};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorMode, Normalizer, StreamingEstimator};
use crate::feature_map::{Embed, FeatureMap, FeatureMapSpec};
use crate::linalg::Matrix;
use crate::precision::{build_precision, oas_shrink, sherman_morrison_update};
use crate::rng::SeededRng;

pub type Dense = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub check: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(check: &str, max_error: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            max_error,
            tolerance,
            pass: max_error <= tolerance,
        }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}: max error {:.3e} (tolerance {:.3e})",
            if self.pass { "PASS" } else { "FAIL" },
            self.check,
            self.max_error,
            self.tolerance
        )
    }
}

/// `exp(−γ‖x − y‖²)`
pub fn exact_rbf_kernel(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone)]
pub struct BatchStats {
    pub means: BTreeMap<u32, Vec<f64>>,
    pub counts: BTreeMap<u32, usize>,
    /// Centered outer-product sum divided by `n − 1`.
    pub covariance: Dense,
}

/// Two-pass batch means and covariance. Pooled mode centers each sample on
/// its own class mean, global mode on the grand mean.
pub fn batch_stats(samples: &[Vec<f64>], labels: &[u32], mode: EstimatorMode) -> BatchStats {
    let dim = samples.first().map_or(0, |s| s.len());
    let mut sums: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for (x, &c) in samples.iter().zip(labels) {
        let s = sums.entry(c).or_insert_with(|| vec![0.0; dim]);
        for k in 0..dim {
            s[k] += x[k];
        }
        *counts.entry(c).or_insert(0) += 1;
    }
    let means: BTreeMap<u32, Vec<f64>> = sums
        .into_iter()
        .map(|(c, s)| {
            let n = counts[&c] as f64;
            (c, s.into_iter().map(|v| v / n).collect())
        })
        .collect();
    let mut grand = vec![0.0; dim];
    for x in samples {
        for k in 0..dim {
            grand[k] += x[k];
        }
    }
    for g in &mut grand {
        *g /= samples.len() as f64;
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for (x, c) in samples.iter().zip(labels) {
        let center = match mode {
            EstimatorMode::PooledWithinClass => &means[c],
            EstimatorMode::Global => &grand,
        };
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += (x[i] - center[i]) * (x[j] - center[j]);
            }
        }
    }
    let denom = samples.len() as f64 - 1.0;
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= denom;
        }
    }
    BatchStats {
        means,
        counts,
        covariance: cov,
    }
}

/// Gauss–Jordan elimination with partial pivoting.
pub fn dense_inverse(a: &Dense) -> Result<Dense> {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().total_cmp(&m[q][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() < 1e-300 {
            return Err(Error::NotPositiveDefinite {
                pivot: col,
                value: m[pivot][col],
            });
        }
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = m[col].clone();
        for (r, row) in m.iter_mut().enumerate() {
            if r != col {
                let f = row[col];
                if f != 0.0 {
                    for (v, pv) in row.iter_mut().zip(&pivot_row) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    Ok(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn mat_vec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

fn mat_mul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

/// The Chen–Wiesel–Eldar–Hero OAS estimator transcribed literally:
/// `F = tr(S)/p · I`,
/// `ρ = min(1, ((1 − 2/p) tr(S²) + tr²(S)) / ((n + 1 − 2/p)(tr(S²) − tr²(S)/p)))`.
pub fn oas_reference(s: &Dense, n: usize) -> (f64, Dense) {
    let p = s.len() as f64;
    let tr: f64 = (0..s.len()).map(|i| s[i][i]).sum();
    let s2 = mat_mul(s, s);
    let tr_s2: f64 = (0..s.len()).map(|i| s2[i][i]).sum();
    let numerator = (1.0 - 2.0 / p) * tr_s2 + tr * tr;
    let denominator = (n as f64 + 1.0 - 2.0 / p) * (tr_s2 - tr * tr / p);
    let rho = if denominator <= 0.0 {
        1.0
    } else {
        (numerator / denominator).min(1.0)
    };
    let target = tr / p;
    let shrunk = (0..s.len())
        .map(|i| {
            (0..s.len())
                .map(|j| (1.0 - rho) * s[i][j] + if i == j { rho * target } else { 0.0 })
                .collect()
        })
        .collect();
    (rho, shrunk)
}

/// Linear discriminant argmax with `w_i = (Σ + λI)⁻¹μ_i`,
/// `b_i = −½μ_iᵀ(Σ + λI)⁻¹μ_i`; ties go to the smallest label.
pub fn batch_lda_predict(means: &BTreeMap<u32, Vec<f64>>, covariance: &Dense, lambda: f64, x: &[f64]) -> Result<u32> {
    let inv = lda_inverse(covariance, lambda)?;
    Ok(lda_argmax(means, &inv, x))
}

fn lda_inverse(covariance: &Dense, lambda: f64) -> Result<Dense> {
    let mut reg = covariance.clone();
    for (i, row) in reg.iter_mut().enumerate() {
        row[i] += lambda;
    }
    dense_inverse(&reg)
}

fn lda_argmax(means: &BTreeMap<u32, Vec<f64>>, inv: &Dense, x: &[f64]) -> u32 {
    let mut best: Option<(f64, u32)> = None;
    for (&label, mu) in means {
        let w = mat_vec(inv, mu);
        let b = -0.5 * mu.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>();
        let g = w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>() + b;
        if best.map_or(true, |(s, _)| g > s) {
            best = Some((g, label));
        }
    }
    best.expect("at least one class").1
}

fn to_matrix(a: &Dense) -> Matrix {
    Matrix::from_fn(a.len(), |i, j| a[i][j])
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn random_spd(rng: &mut SeededRng, dim: usize, extra: usize) -> Dense {
    let g: Dense = (0..dim + extra)
        .map(|_| (0..dim).map(|_| rng.standard_normal()).collect())
        .collect();
    (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| g.iter().map(|r| r[i] * r[j]).sum::<f64>() / (dim + extra) as f64)
                .collect()
        })
        .collect()
}

/// Streaming statistics versus two-pass batch statistics over random
/// streams in both estimator modes, plus invariance under permutation.
pub fn check_streaming_vs_batch(num_streams: usize, seed: u64) -> Vec<OracleReport> {
    let mut rng = SeededRng::new(seed);
    let mut mean_err = 0.0f64;
    let mut cov_err = 0.0f64;
    let mut perm_err = 0.0f64;
    for s in 0..num_streams {
        let dim = 1 + rng.below(50);
        let n = 2 + rng.below(4999);
        let classes = 1 + rng.below(10);
        let mode = if s % 2 == 0 {
            EstimatorMode::PooledWithinClass
        } else {
            EstimatorMode::Global
        };
        let offsets: Dense = (0..classes)
            .map(|_| (0..dim).map(|_| 3.0 * rng.standard_normal()).collect())
            .collect();
        let scales: Vec<f64> = (0..dim).map(|_| 0.1 + 2.0 * rng.uniform()).collect();
        let mut labels: Vec<u32> = (0..n).map(|_| rng.below(classes) as u32).collect();
        labels.sort_unstable();
        let samples: Dense = labels
            .iter()
            .map(|&c| {
                (0..dim)
                    .map(|k| offsets[c as usize][k] + scales[k] * rng.standard_normal())
                    .collect()
            })
            .collect();

        let run = |order: &[usize]| {
            let mut est = StreamingEstimator::new(dim, mode, Normalizer::SamplesMinusOne);
            for &i in order {
                est.observe(&samples[i], labels[i]).expect("finite sample");
            }
            est
        };
        let forward: Vec<usize> = (0..n).collect();
        let est = run(&forward);
        let batch = batch_stats(&samples, &labels, mode);

        let means = est.class_means();
        assert_eq!(means.len(), batch.means.len());
        for (c, m) in &batch.means {
            mean_err = mean_err.max(max_rel(&means[c], m));
        }
        let cov = est.covariance().expect("n >= 2");
        let flat: Vec<f64> = batch.covariance.iter().flatten().copied().collect();
        cov_err = cov_err.max(max_rel(cov.as_slice(), &flat));

        let mut shuffled = forward;
        rng.shuffle(&mut shuffled);
        let permuted = run(&shuffled);
        perm_err = perm_err.max(max_rel(permuted.covariance().expect("n >= 2").as_slice(), cov.as_slice()));
        for (c, m) in &means {
            perm_err = perm_err.max(max_rel(&permuted.class_means()[c], m));
        }
    }
    vec![
        OracleReport::new("streaming_means_vs_batch", mean_err, 1e-8),
        OracleReport::new("streaming_covariance_vs_batch", cov_err, 1e-8),
        OracleReport::new("streaming_permutation_invariance", perm_err, 1e-8),
    ]
}

fn kernel_pairs(rng: &mut SeededRng, count: usize, dim: usize) -> Vec<(Vec<f32>, Vec<f32>)> {
    (0..count)
        .map(|_| {
            let x: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
            let u: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = 2.0 * rng.uniform();
            let y: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + r * b / norm).collect();
            let to32 = |v: &[f64]| v.iter().map(|&t| t as f32).collect::<Vec<f32>>();
            (to32(&x), to32(&y))
        })
        .collect()
}

/// Mean |φ(x)ᵀφ(y) − k(x, y)| over random pairs at distance ≤ 2.
pub fn rff_kernel_error(num_bases: usize, gamma: f64, pairs: usize, seed: u64) -> f64 {
    let dim = 10;
    let map = FeatureMap::sample(FeatureMapSpec {
        input_dim: dim,
        num_bases,
        gamma,
        seed,
    })
    .expect("valid spec");
    let mut rng = SeededRng::with_stream(seed, 1);
    let pairs = kernel_pairs(&mut rng, pairs, dim);
    let total: f64 = pairs
        .iter()
        .map(|(x, y)| {
            let ex = map.embed(x).expect("dims");
            let ey = map.embed(y).expect("dims");
            let approx: f64 = ex.iter().zip(&ey).map(|(a, b)| *a as f64 * *b as f64).sum();
            let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let ys: Vec<f64> = y.iter().map(|&v| v as f64).collect();
            (approx - exact_rbf_kernel(&xs, &ys, gamma)).abs()
        })
        .sum();
    total / pairs.len() as f64
}

pub fn check_rff_kernel(seed: u64) -> Vec<OracleReport> {
    let at_5000 = rff_kernel_error(5000, 1.0, 100, seed);
    let avg = |bases: usize| (0..5).map(|s| rff_kernel_error(bases, 1.0, 100, seed + s)).sum::<f64>() / 5.0;
    let (e100, e1000, e10000) = (avg(100), avg(1000), avg(10_000));
    // Ratio of consecutive errors must stay strictly below one.
    let worst_ratio = (e1000 / e100).max(e10000 / e1000);
    vec![
        OracleReport::new("rff_kernel_mean_abs_error_d5000", at_5000, 0.02),
        OracleReport::new("rff_error_decreases_with_bases", worst_ratio, 1.0 - 1e-12),
    ]
}

pub fn check_oas(seed: u64) -> Vec<OracleReport> {
    let mut rng = SeededRng::new(seed);
    let mut rho_violation = 0.0f64;
    for trial in 0..200 {
        let dim = 1 + rng.below(12);
        let s = match trial % 4 {
            0 => vec![vec![0.0; dim]; dim],
            1 => {
                let v = rng.uniform() * 5.0;
                (0..dim).map(|i| (0..dim).map(|j| if i == j { v } else { 0.0 }).collect()).collect()
            }
            2 => {
                // Rank one.
                let u: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
                (0..dim).map(|i| (0..dim).map(|j| u[i] * u[j]).collect()).collect()
            }
            _ => {
                let extra = rng.below(3);
                random_spd(&mut rng, dim, extra)
            }
        };
        let n = 2 + rng.below(100) as u64;
        let r = oas_shrink(to_matrix(&s), n).expect("symmetric input");
        rho_violation = rho_violation.max((-r.rho).max(r.rho - 1.0).max(0.0));
    }

    let mut fixed_err = 0.0f64;
    for sigma2 in [1e-3, 0.5, 1.0, 42.0] {
        let mut m = Matrix::identity(7);
        m.scale(sigma2);
        let r = oas_shrink(m.clone(), 30).expect("symmetric");
        fixed_err = fixed_err.max(max_rel(r.shrunk.as_slice(), m.as_slice()));
    }

    let mut agree = 0.0f64;
    for _ in 0..20 {
        let s = random_spd(&mut rng, 20, 5);
        let (rho, shrunk) = oas_reference(&s, 50);
        let r = oas_shrink(to_matrix(&s), 50).expect("symmetric");
        let flat: Vec<f64> = shrunk.iter().flatten().copied().collect();
        agree = agree.max((r.rho - rho).abs()).max(max_rel(r.shrunk.as_slice(), &flat));
    }
    vec![
        OracleReport::new("oas_rho_in_unit_interval", rho_violation, 0.0),
        OracleReport::new("oas_scaled_identity_fixed_point", fixed_err, 1e-15),
        OracleReport::new("oas_vs_reference", agree, 1e-10),
    ]
}

pub fn check_precision(seed: u64) -> Vec<OracleReport> {
    let mut rng = SeededRng::new(seed);
    let dim = 50;
    let s = random_spd(&mut rng, dim, 10);
    let lambda = 1e-3;
    let pm = build_precision(to_matrix(&s), lambda).expect("SPD");
    let inv = lda_inverse(&s, lambda).expect("invertible");
    let mut solve_err = 0.0f64;
    let mut quad_err = 0.0f64;
    let mut residual = 0.0f64;
    for _ in 0..100 {
        let v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let z = pm.solve(&v).expect("dims");
        solve_err = solve_err.max(max_rel(&z, &mat_vec(&inv, &v)));
        let want: f64 = v.iter().zip(mat_vec(&inv, &v)).map(|(a, b)| a * b).sum();
        let got = pm.mahalanobis_sq(&v).expect("dims");
        quad_err = quad_err.max((got - want).abs() / want.abs());
        let mut az = mat_vec(&s, &z);
        for (k, value) in az.iter_mut().enumerate() {
            *value += lambda * z[k];
        }
        let r: f64 = az.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        residual = residual.max(r / nv);
    }
    vec![
        OracleReport::new("precision_solve_vs_dense_inverse", solve_err, 1e-8),
        OracleReport::new("mahalanobis_vs_dense_quadratic_form", quad_err, 1e-8),
        OracleReport::new("precision_relative_residual", residual, 1e-6),
    ]
}

/// Sequential rank-one inverse updates against a direct inverse of the
/// accumulated matrix.
pub fn check_sherman_morrison(dim: usize, updates: usize, seed: u64) -> OracleReport {
    let mut rng = SeededRng::new(seed);
    let mut a: Dense = (0..dim).map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let mut inv = Matrix::identity(dim);
    for _ in 0..updates {
        let u: Vec<f64> = (0..dim).map(|_| rng.standard_normal() / (dim as f64).sqrt()).collect();
        let c = 0.1 + rng.uniform();
        sherman_morrison_update(&mut inv, &u, c).expect("well-conditioned update");
        for i in 0..dim {
            for j in 0..dim {
                a[i][j] += c * u[i] * u[j];
            }
        }
    }
    let direct = dense_inverse(&a).expect("SPD");
    let flat: Vec<f64> = direct.iter().flatten().copied().collect();
    let err = inv
        .as_slice()
        .iter()
        .zip(&flat)
        .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    OracleReport::new("sherman_morrison_vs_direct_inverse", err, 1e-6)
}

/// Streaming SLDA predictions against batch LDA on balanced classes.
/// The reported error is the number of disagreeing labels.
pub fn check_lda_equivalence(test_points: usize, seed: u64) -> OracleReport {
    let (dim, classes, per_class, lambda) = (10, 3, 200, 1e-3);
    let mut rng = SeededRng::new(seed);
    let config = ModelVariant {
        variant: Variant::Slda,
        embedding: None,
        lambda,
        estimator_mode: EstimatorMode::PooledWithinClass,
        normalizer: Normalizer::SamplesMinusOne,
    };
    let mut model = StreamingClassifier::new(config, dim).expect("valid config");
    let mix: Dense = (0..dim).map(|_| (0..dim).map(|_| rng.standard_normal()).collect()).collect();
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        let center: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        for _ in 0..per_class {
            let z: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
            let x: Vec<f32> = mat_vec(&mix, &z)
                .iter()
                .zip(&center)
                .map(|(a, b)| (0.5 * a + b) as f32)
                .collect();
            model.observe(&x, c as u32).expect("finite");
            samples.push(x.iter().map(|&v| v as f64).collect::<Vec<f64>>());
            labels.push(c as u32);
        }
    }
    let fitted = model.into_fitted().expect("enough samples");
    let batch = batch_stats(&samples, &labels, EstimatorMode::PooledWithinClass);
    let (_, shrunk) = oas_reference(&batch.covariance, samples.len());
    let inv = lda_inverse(&shrunk, lambda).expect("invertible");
    let mut disagreements = 0usize;
    for _ in 0..test_points {
        let x: Vec<f32> = (0..dim).map(|_| (2.0 * rng.standard_normal()) as f32).collect();
        let xs: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if fitted.predict(&x).expect("dims") != lda_argmax(&batch.means, &inv, &xs) {
            disagreements += 1;
        }
    }
    OracleReport::new("lda_equivalence_disagreements", disagreements as f64, 0.0)
}

/// Scaling the regularized covariance by c > 0 must not move the argmin of
/// the Mahalanobis scores. Reports the number of flipped decisions.
pub fn check_scale_invariance(trials: usize, seed: u64) -> OracleReport {
    let mut rng = SeededRng::new(seed);
    let mut flips = 0usize;
    for _ in 0..trials {
        let dim = 2 + rng.below(6);
        let s = random_spd(&mut rng, dim, 3);
        let c = 0.01 + 100.0 * rng.uniform();
        let lambda = 1e-3;
        let base = build_precision(to_matrix(&s), lambda).expect("SPD");
        let mut scaled_s = to_matrix(&s);
        scaled_s.scale(c);
        let scaled = build_precision(scaled_s, c * lambda).expect("SPD");
        let means: Dense = (0..3).map(|_| (0..dim).map(|_| rng.standard_normal()).collect()).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let argmin = |pm: &crate::precision::PrecisionModel| {
            let mut best = (f64::INFINITY, 0);
            for (k, m) in means.iter().enumerate() {
                let d: Vec<f64> = x.iter().zip(m).map(|(a, b)| a - b).collect();
                let q = pm.mahalanobis_sq(&d).expect("dims");
                if q < best.0 {
                    best = (q, k);
                }
            }
            best.1
        };
        if argmin(&base) != argmin(&scaled) {
            flips += 1;
        }
    }
    OracleReport::new("mahalanobis_scale_invariance_flips", flips as f64, 0.0)
}

/// Everything the `verify` command runs, at default sizes.
pub fn run_suite(seed: u64) -> Vec<OracleReport> {
    let mut out = check_streaming_vs_batch(50, seed);
    out.extend(check_rff_kernel(seed));
    out.extend(check_oas(seed));
    out.extend(check_precision(seed));
    out.push(check_sherman_morrison(30, 200, seed));
    out.push(check_lda_equivalence(1000, seed));
    out.push(check_scale_invariance(1000, seed));
    out
}
