//! Shrunk, ridge-regularized precision for Mahalanobis scoring.
//!
//! The raw covariance `S` is shrunk toward `μI` with the Oracle
//! Approximating Shrinkage intensity
//!
//! ```text
//! μ = tr(S)/E
//! ρ = min(1, [(1 − 2/E)·tr(S²) + tr(S)²] / [(n + 1 − 2/E)·(tr(S²) − tr(S)²/E)])
//! Ŝ = (1 − ρ)·S + ρ·μ·I
//! ```
//!
//! then `Ŝ + λI` is Cholesky-factored. Quadratic forms go through solves;
//! no dense inverse is formed on this path.

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};

#[derive(Debug, Clone)]
pub struct ShrinkageResult {
    pub rho: f64,
    pub mu: f64,
    pub shrunk: Matrix,
}

/// OAS shrinkage of a symmetric covariance estimated from `n` samples.
/// Consumes `s` and shrinks it in place.
pub fn oas_shrink(mut s: Matrix, n: u64) -> Result<ShrinkageResult> {
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "shrinkage needs at least two samples, got {n}"
        )));
    }
    let e = s.dim();
    if e == 0 {
        return Err(Error::Config("empty covariance matrix".into()));
    }
    let norm = s.max_abs();
    if !norm.is_finite() {
        return Err(Error::Data("covariance has non-finite entries".into()));
    }
    let asym = s.max_asymmetry();
    if asym > 1e-6 * norm {
        return Err(Error::Data(format!(
            "covariance is not symmetric (max asymmetry {asym:e}, scale {norm:e})"
        )));
    }

    let ef = e as f64;
    let tr = s.trace();
    let tr_sq = s.frobenius_sq();
    let mu = tr / ef;
    let num = (1.0 - 2.0 / ef) * tr_sq + tr * tr;
    let den = (n as f64 + 1.0 - 2.0 / ef) * (tr_sq - tr * tr / ef);
    let rho = if den <= 0.0 { 1.0 } else { (num / den).clamp(0.0, 1.0) };

    s.scale(1.0 - rho);
    s.add_to_diagonal(rho * mu);
    Ok(ShrinkageResult { rho, mu, shrunk: s })
}

#[derive(Debug, Clone)]
pub struct PrecisionModel {
    lambda: f64,
    factor: Cholesky,
    log_det: f64,
}

/// Factors `shrunk + λI`. A non-positive pivot is reported with its index.
pub fn build_precision(mut shrunk: Matrix, lambda: f64) -> Result<PrecisionModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Config(format!("ridge parameter must be >= 0, got {lambda}")));
    }
    shrunk.add_to_diagonal(lambda);
    let factor = Cholesky::factor(shrunk)?;
    let log_det = factor.log_det();
    Ok(PrecisionModel {
        lambda,
        factor,
        log_det,
    })
}

impl PrecisionModel {
    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `log det(Ŝ + λI)`
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `(Ŝ + λI) z = v`.
    pub fn solve(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.factor.solve(v)
    }

    pub fn solve_in_place(&self, v: &mut [f64]) -> Result<()> {
        self.factor.solve_in_place(v)
    }

    /// `δᵀ(Ŝ + λI)⁻¹δ`, clamped at zero when rounding pushes it just below.
    pub fn mahalanobis_sq(&self, delta: &[f64]) -> Result<f64> {
        check_len(self.dim(), delta.len())?;
        let z = self.solve(delta)?;
        let q = dot(delta, &z);
        Ok(if q < 0.0 && q >= -1e-9 { 0.0 } else { q })
    }
}

/// Rank-one update of an inverse: given `inv = A⁻¹`, overwrite it with
/// `(A + c·uuᵀ)⁻¹ = inv − c·(inv u)(uᵀ inv) / (1 + c·uᵀ inv u)`.
/// `inv` must be symmetric.
pub fn sherman_morrison_update(inv: &mut Matrix, u: &[f64], c: f64) -> Result<()> {
    check_len(inv.dim(), u.len())?;
    let w = inv.mul_vec(u)?;
    let denominator = 1.0 + c * dot(u, &w);
    if denominator.abs() < 1e-12 || !denominator.is_finite() {
        return Err(Error::SingularUpdate { denominator });
    }
    let k = c / denominator;
    for (i, &wi) in w.iter().enumerate() {
        let s = k * wi;
        for (a, &wj) in inv.row_mut(i).iter_mut().zip(&w) {
            *a -= s * wj;
        }
    }
    Ok(())
}
