//! Browser demo: kernel approximation, 2-D decision regions, and accuracy
//! against embedding size on a concentric-rings toy problem.

use randumb::bench::compute_accuracy;
use randumb::oracle::exact_rbf_kernel;
use randumb::rng::SeededRng;
use randumb::{
    Embed, EmbeddingSpec, EstimatorMode, FeatureMap, FeatureMapSpec, FittedClassifier, ModelVariant, Normalizer,
    RpSpec, StreamingClassifier, Variant,
};
use wasm_bindgen::prelude::*;

/// Half-width of the square the toy data and decision grid live in.
pub const EXTENT: f32 = 4.0;

pub struct Toy {
    pub points: Vec<[f32; 2]>,
    pub labels: Vec<u32>,
}

/// Rings of radius 1, 2, 3, … with Gaussian radial noise, ordered class by
/// class so streaming them is class-incremental.
pub fn rings(classes: u32, per_class: usize, noise: f64, seed: u64) -> Toy {
    let mut rng = SeededRng::new(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for c in 0..classes {
        for _ in 0..per_class {
            let theta = std::f64::consts::TAU * rng.uniform();
            let r = (c + 1) as f64 + noise * rng.standard_normal();
            points.push([(r * theta.cos()) as f32, (r * theta.sin()) as f32]);
            labels.push(c);
        }
    }
    Toy { points, labels }
}

pub fn model_config(variant: Variant, embed_dim: usize, gamma: f64, lambda: f64, seed: u64) -> randumb::Result<ModelVariant> {
    let embedding = match variant {
        Variant::Randumb | Variant::KernelNcm => Some(EmbeddingSpec::Fourier(FeatureMapSpec::from_embedding_size(
            2, embed_dim, gamma, seed,
        )?)),
        Variant::RpRelu => Some(EmbeddingSpec::RandomRelu(RpSpec {
            input_dim: 2,
            output_dim: embed_dim,
            seed,
        })),
        Variant::Slda | Variant::Ncm => None,
    };
    let cfg = ModelVariant {
        variant,
        embedding,
        lambda,
        estimator_mode: EstimatorMode::PooledWithinClass,
        normalizer: Normalizer::SamplesMinusOne,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn fit(cfg: ModelVariant, train: &Toy) -> randumb::Result<FittedClassifier> {
    let mut model = StreamingClassifier::new(cfg, 2)?;
    for (p, &l) in train.points.iter().zip(&train.labels) {
        model.observe(p, l)?;
    }
    model.into_fitted()
}

pub fn accuracy(model: &FittedClassifier, test: &Toy) -> randumb::Result<f64> {
    let preds = test.points.iter().map(|p| model.predict(p)).collect::<randumb::Result<Vec<_>>>()?;
    Ok(compute_accuracy(&preds, &test.labels)?.average)
}

/// Row-major labels over a `resolution × resolution` grid spanning
/// `[-EXTENT, EXTENT]²`, top row first.
pub fn decision_grid(model: &FittedClassifier, resolution: usize) -> randumb::Result<Vec<u32>> {
    let step = 2.0 * EXTENT / resolution as f32;
    let mut out = Vec::with_capacity(resolution * resolution);
    for row in 0..resolution {
        let y = EXTENT - (row as f32 + 0.5) * step;
        for col in 0..resolution {
            let x = -EXTENT + (col as f32 + 0.5) * step;
            out.push(model.predict(&[x, y])?);
        }
    }
    Ok(out)
}

/// `[distance, exact, approximate]` triples for points `distance` apart
/// along a random direction in the plane.
pub fn kernel_samples(num_bases: usize, gamma: f64, seed: u64, steps: usize) -> randumb::Result<Vec<f64>> {
    let map = FeatureMap::sample(FeatureMapSpec {
        input_dim: 2,
        num_bases,
        gamma,
        seed,
    })?;
    let mut rng = SeededRng::with_stream(seed, 7);
    let mut out = Vec::with_capacity(3 * steps);
    for i in 0..steps {
        let d = 3.0 * i as f64 / (steps.max(2) - 1) as f64;
        let theta = std::f64::consts::TAU * rng.uniform();
        let x = [rng.standard_normal(), rng.standard_normal()];
        let y = [x[0] + d * theta.cos(), x[1] + d * theta.sin()];
        let fx = map.embed(&[x[0] as f32, x[1] as f32])?;
        let fy = map.embed(&[y[0] as f32, y[1] as f32])?;
        let approx: f64 = fx.iter().zip(&fy).map(|(a, b)| *a as f64 * *b as f64).sum();
        out.extend([d, exact_rbf_kernel(&x, &y, gamma), approx]);
    }
    Ok(out)
}

fn js(e: randumb::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn parse_variant(name: &str) -> Result<Variant, JsError> {
    name.parse().map_err(js)
}

#[wasm_bindgen]
pub struct ToyRun {
    accuracy: f64,
    grid: Vec<u32>,
    points: Vec<f32>,
    labels: Vec<u32>,
}

#[wasm_bindgen]
impl ToyRun {
    #[wasm_bindgen(getter)]
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    #[wasm_bindgen(getter)]
    pub fn grid(&self) -> Vec<u32> {
        self.grid.clone()
    }

    /// Training points as interleaved x, y.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f32> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }
}

#[wasm_bindgen(js_name = kernelProfile)]
pub fn kernel_profile(num_bases: usize, gamma: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    kernel_samples(num_bases, gamma, seed.into(), 61).map_err(js)
}

#[wasm_bindgen(js_name = classifyRings)]
pub fn classify_rings(
    variant: &str,
    embed_dim: usize,
    gamma: f64,
    lambda: f64,
    seed: u32,
    resolution: usize,
) -> Result<ToyRun, JsError> {
    let seed = u64::from(seed);
    let cfg = model_config(parse_variant(variant)?, embed_dim, gamma, lambda, seed).map_err(js)?;
    let train = rings(3, 300, 0.25, seed);
    let test = rings(3, 200, 0.25, seed.wrapping_add(1));
    let model = fit(cfg, &train).map_err(js)?;
    Ok(ToyRun {
        accuracy: accuracy(&model, &test).map_err(js)?,
        grid: decision_grid(&model, resolution).map_err(js)?,
        points: train.points.iter().flatten().copied().collect(),
        labels: train.labels,
    })
}

/// Test accuracy of `variant` on the rings for each embedding size.
#[wasm_bindgen(js_name = dimensionCurve)]
pub fn dimension_curve(variant: &str, dims: Vec<u32>, gamma: f64, lambda: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    let seed = u64::from(seed);
    let variant = parse_variant(variant)?;
    let train = rings(3, 300, 0.25, seed);
    let test = rings(3, 200, 0.25, seed.wrapping_add(1));
    dims.iter()
        .map(|&e| {
            let cfg = model_config(variant, e as usize, gamma, lambda, seed)?;
            accuracy(&fit(cfg, &train)?, &test)
        })
        .collect::<randumb::Result<Vec<f64>>>()
        .map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rings_are_class_ordered() {
        let t = rings(3, 10, 0.1, 0);
        assert_eq!(t.points.len(), 30);
        assert!(t.labels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn embedding_separates_rings_that_linear_rules_cannot() {
        let train = rings(3, 300, 0.25, 1);
        let test = rings(3, 200, 0.25, 2);
        let rff = fit(model_config(Variant::Randumb, 200, 1.0, 1e-4, 1).unwrap(), &train).unwrap();
        let lin = fit(model_config(Variant::Slda, 0, 1.0, 1e-4, 1).unwrap(), &train).unwrap();
        let a = accuracy(&rff, &test).unwrap();
        let b = accuracy(&lin, &test).unwrap();
        assert!(a > 0.9, "rff {a}");
        assert!(b < 0.6, "linear {b}");
    }

    #[test]
    fn grid_has_requested_shape() {
        let train = rings(2, 50, 0.2, 3);
        let m = fit(model_config(Variant::Ncm, 0, 1.0, 0.0, 3).unwrap(), &train).unwrap();
        let g = decision_grid(&m, 16).unwrap();
        assert_eq!(g.len(), 256);
        assert!(g.iter().all(|&l| l < 2));
    }

    #[test]
    fn kernel_samples_track_exact_kernel() {
        let s = kernel_samples(4000, 1.0, 5, 31).unwrap();
        assert_eq!(s.len(), 93);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 1.0).abs() < 1e-12);
        let err = s.chunks(3).map(|t| (t[1] - t[2]).abs()).sum::<f64>() / 31.0;
        assert!(err < 0.05, "{err}");
    }

    #[test]
    fn odd_embedding_is_rejected() {
        assert!(model_config(Variant::Randumb, 7, 1.0, 1e-4, 0).is_err());
    }
}
