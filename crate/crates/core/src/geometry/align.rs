use nalgebra::{Matrix3, Vector3};

use super::{Pose2, Transform3};
use crate::{Error, Result};

/// Weighted least-squares SE(2) alignment of `source → target` pairs.
///
/// Closed form: weighted centroids plus the angle of the 2×2 cross-covariance.
pub fn align_rigid_2d(pairs: &[([f64; 2], [f64; 2])], weights: &[f64]) -> Result<Pose2> {
    if pairs.len() != weights.len() {
        return Err(Error::InvalidParameter(format!(
            "{} pairs but {} weights",
            pairs.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidParameter("all weights are zero".into()));
    }

    let mut cs = [0.0; 2];
    let mut ct = [0.0; 2];
    for ((s, t), w) in pairs.iter().zip(weights) {
        cs[0] += w * s[0];
        cs[1] += w * s[1];
        ct[0] += w * t[0];
        ct[1] += w * t[1];
    }
    for c in cs.iter_mut().chain(ct.iter_mut()) {
        *c /= total;
    }

    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut spread = 0.0;
    for ((s, t), w) in pairs.iter().zip(weights) {
        let (sx, sy) = (s[0] - cs[0], s[1] - cs[1]);
        let (tx, ty) = (t[0] - ct[0], t[1] - ct[1]);
        dot += w * (sx * tx + sy * ty);
        cross += w * (sx * ty - sy * tx);
        spread += w * (sx * sx + sy * sy);
    }
    let scale = 1.0 + cs[0].abs().max(cs[1].abs());
    if spread / total <= (1e-12 * scale).powi(2) {
        return Err(Error::DegenerateGeometry("source points coincide".into()));
    }

    let yaw = cross.atan2(dot);
    let (sin, cos) = yaw.sin_cos();
    let tx = ct[0] - (cos * cs[0] - sin * cs[1]);
    let ty = ct[1] - (sin * cs[0] + cos * cs[1]);
    Ok(Pose2::new(tx, ty, yaw))
}

/// Unweighted least-squares SE(3) alignment (Kabsch with reflection fix).
pub fn align_rigid_3d(source: &[[f64; 3]], target: &[[f64; 3]]) -> Result<Transform3> {
    if source.len() != target.len() || source.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "need matching non-empty point lists, got {} and {}",
            source.len(),
            target.len()
        )));
    }
    let n = source.len() as f64;
    let cs = source.iter().map(|p| Vector3::from(*p)).sum::<Vector3<f64>>() / n;
    let ct = target.iter().map(|p| Vector3::from(*p)).sum::<Vector3<f64>>() / n;

    let mut h = Matrix3::zeros();
    let mut spread = 0.0;
    for (s, t) in source.iter().zip(target) {
        let ds = Vector3::from(*s) - cs;
        let dt = Vector3::from(*t) - ct;
        h += ds * dt.transpose();
        spread += ds.norm_squared();
    }
    let scale = 1.0 + cs.amax();
    if spread / n <= (1e-12 * scale).powi(2) {
        return Err(Error::DegenerateGeometry("source points coincide".into()));
    }

    let svd = h.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::SingularMatrix("SVD of cross-covariance failed".into())),
    };
    let v = v_t.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let translation = ct - rotation * cs;
    Ok(Transform3 {
        rotation,
        translation,
    })
}
