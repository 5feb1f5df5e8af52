use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::geometry::normalize_angle;

/// Scaled unscented transform parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UkfParams {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UkfParams {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaWeights {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    /// `n + λ` as implied by the (rounded) outer weights.
    pub spread: f64,
}

pub fn sigma_weights(n: usize, p: &UkfParams) -> SigmaWeights {
    let nf = n as f64;
    let spread = p.alpha * p.alpha * (nf + p.kappa);
    // Outer weights are rounded to a multiple of 2⁻²⁰ so that every partial
    // sum of the weights is exact and they add up to one in floating point
    // (relative change below 1e-10 for the default parameters).
    let grid = (2.0f64).powi(20);
    let wi = (grid / (2.0 * spread)).round() / grid;
    let mut mean = vec![wi; 2 * n + 1];
    let mut cov = mean.clone();
    mean[0] = 1.0 - 2.0 * nf * wi;
    cov[0] = mean[0] + 1.0 - p.alpha * p.alpha + p.beta;
    SigmaWeights {
        mean,
        cov,
        spread: 1.0 / (2.0 * wi),
    }
}

/// Lower Cholesky factor; falls back to clamping eigenvalues when the
/// matrix has lost positive definiteness to round-off.
pub(crate) fn robust_cholesky(p: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (p + p.transpose()) * 0.5;
    if let Some(c) = sym.clone().cholesky() {
        return c.l();
    }
    let eig = sym.symmetric_eigen();
    let floor = eig.eigenvalues.amax().max(1.0) * 1e-12;
    let clamped = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(floor)));
    let rebuilt = &eig.eigenvectors * clamped * eig.eigenvectors.transpose();
    let rebuilt = (&rebuilt + rebuilt.transpose()) * 0.5;
    rebuilt.cholesky().map(|c| c.l()).unwrap_or_else(|| {
        DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(floor).sqrt()))
    })
}

pub(crate) fn sigma_points(x: &DVector<f64>, p: &DMatrix<f64>, w: &SigmaWeights) -> Vec<DVector<f64>> {
    let l = robust_cholesky(p) * w.spread.sqrt();
    let n = x.len();
    let mut out = Vec::with_capacity(2 * n + 1);
    out.push(x.clone());
    for i in 0..n {
        out.push(x + l.column(i));
    }
    for i in 0..n {
        out.push(x - l.column(i));
    }
    out
}

/// Weighted mean and covariance of transformed sigma points. Deviations are
/// taken from the first point so the large negative center weight does not
/// cancel catastrophically; entries listed in `angles` are wrapped.
pub(crate) fn sigma_moments(ys: &[DVector<f64>], w: &SigmaWeights, angles: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
    let devs = deviations(ys, &ys[0], angles);
    let mut shift = DVector::zeros(ys[0].len());
    for (d, wm) in devs.iter().zip(&w.mean).skip(1) {
        shift += d * *wm;
    }
    let mut mean = &ys[0] + &shift;
    for &a in angles {
        mean[a] = normalize_angle(mean[a]);
    }
    let mut cov = DMatrix::zeros(mean.len(), mean.len());
    for (d, wc) in devs.iter().zip(&w.cov) {
        let e = d - &shift;
        cov.syger(*wc, &e, &e, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    (mean, cov)
}

pub(crate) fn deviations(ys: &[DVector<f64>], center: &DVector<f64>, angles: &[usize]) -> Vec<DVector<f64>> {
    ys.iter()
        .map(|y| {
            let mut d = y - center;
            for &a in angles {
                d[a] = normalize_angle(d[a]);
            }
            d
        })
        .collect()
}

pub(crate) fn symmetrize(p: &mut DMatrix<f64>) {
    let t = p.transpose();
    *p += t;
    *p *= 0.5;
}
