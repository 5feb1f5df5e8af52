use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Gaussian-process contour hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub sigma_f: f64,
    pub sigma_r: f64,
    /// Length scale in radians.
    pub length_scale: f64,
    /// Forgetting rate, 1/s.
    pub tau: f64,
    pub n_theta: usize,
    /// Prior mean of the radial function, meters.
    pub mean_radius: f64,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            sigma_f: 1.0,
            sigma_r: 0.2,
            length_scale: std::f64::consts::FRAC_PI_4,
            tau: 0.01,
            n_theta: 20,
            mean_radius: 2.0,
        }
    }
}

impl GpParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_f > 0.0
            && self.length_scale > 0.0
            && self.sigma_r >= 0.0
            && self.tau >= 0.0
            && self.n_theta >= 3
            && self.mean_radius.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid GP parameters: {self:?}")))
        }
    }
}

/// `σ_f²·exp(−2 sin²(|u−v|/2) / l²) + σ_r²`.
pub fn gp_kernel(u: f64, v: f64, p: &GpParams) -> f64 {
    let s = ((u - v).abs() / 2.0).sin();
    p.sigma_f * p.sigma_f * (-2.0 * s * s / (p.length_scale * p.length_scale)).exp() + p.sigma_r * p.sigma_r
}

pub fn gp_gram(angles: &[f64], p: &GpParams) -> DMatrix<f64> {
    DMatrix::from_fn(angles.len(), angles.len(), |i, j| gp_kernel(angles[i], angles[j], p))
}

/// `θ_i = 2π·i / n` for `i = 0..n`.
pub fn basis_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

fn kernel_vector(query: f64, basis: &[f64], p: &GpParams) -> DVector<f64> {
    DVector::from_iterator(basis.len(), basis.iter().map(|&b| gp_kernel(query, b, p)))
}

/// Factorizes the Gram matrix, failing when it is not numerically positive
/// definite.
pub(crate) fn gram_cholesky(basis: &[f64], p: &GpParams) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let k = gp_gram(basis, p);
    let max_diag = k.diagonal().max();
    let chol = k
        .cholesky()
        .ok_or_else(|| Error::SingularMatrix("GP Gram matrix is not positive definite".into()))?;
    let min_pivot = chol.l_dirty().diagonal().min();
    if min_pivot * min_pivot <= 1e-14 * max_diag {
        return Err(Error::SingularMatrix("GP Gram matrix is numerically singular".into()));
    }
    Ok(chol)
}

/// Posterior weights `k(θ*, θ)·K⁻¹` and residual variance
/// `k(θ*, θ*) − k(θ*, θ)·K⁻¹·k(θ, θ*)`.
pub fn gp_regress(query: f64, basis: &[f64], p: &GpParams) -> Result<(DVector<f64>, f64)> {
    let chol = gram_cholesky(basis, p)?;
    Ok(regress_with(&chol, query, basis, p))
}

pub(crate) fn regress_with(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    query: f64,
    basis: &[f64],
    p: &GpParams,
) -> (DVector<f64>, f64) {
    let ks = kernel_vector(query, basis, p);
    let w = chol.solve(&ks);
    let var = gp_kernel(query, query, p) - ks.dot(&w);
    (w, var)
}

/// GP interpolation of the radial function: `μ + w·(radii − μ)`.
pub(crate) fn radius_at(weights: &DVector<f64>, radii: &DVector<f64>, mean: f64) -> f64 {
    mean + weights.iter().zip(radii.iter()).map(|(w, r)| w * (r - mean)).sum::<f64>()
}
