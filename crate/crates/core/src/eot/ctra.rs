use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use super::ukf::{sigma_moments, sigma_points, sigma_weights, UkfParams};
use crate::geometry::normalize_angle;

/// Index of the heading inside the kinematic vector.
pub const PHI: usize = 4;

/// CTRA kinematics `[x, y, v, a, φ, φ̇]` with covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicState {
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub covariance: Matrix6<f64>,
}

impl KinematicState {
    pub fn new(s: [f64; 6], covariance: Matrix6<f64>) -> Self {
        Self {
            x: s[0],
            y: s[1],
            v: s[2],
            a: s[3],
            phi: s[4],
            phi_dot: s[5],
            covariance,
        }
    }

    pub fn vector(&self) -> [f64; 6] {
        [self.x, self.y, self.v, self.a, self.phi, self.phi_dot]
    }
}

/// `(sin u)/u`-style terms of the CTRA integrals, from a series for small
/// turn angles `u = φ̇·dt`. Returns `(C, S)` with
/// `C = ∫₀ᵀ (v + a s) cos(φ̇ s) ds` and `S = ∫₀ᵀ (v + a s) sin(φ̇ s) ds`.
fn turn_integrals(v: f64, a: f64, w: f64, t: f64) -> (f64, f64) {
    let u = w * t;
    if u.abs() < 1e-2 {
        let u2 = u * u;
        let sin_u_over_w = t * (1.0 - u2 / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0)));
        let one_minus_cos_over_w = t * u * (0.5 - u2 / 24.0 * (1.0 - u2 / 30.0));
        let ic = t * t * (0.5 - u2 / 8.0 + u2 * u2 / 144.0 - u2 * u2 * u2 / 5760.0);
        let is = t * t * u * (1.0 / 3.0 - u2 / 30.0 + u2 * u2 / 840.0);
        (v * sin_u_over_w + a * ic, v * one_minus_cos_over_w + a * is)
    } else {
        let (s, c) = u.sin_cos();
        let c_int = v * s / w + a * (t * s / w + (c - 1.0) / (w * w));
        let s_int = v * (1.0 - c) / w + a * (-t * c / w + s / (w * w));
        (c_int, s_int)
    }
}

/// Closed-form CTRA propagation of the mean. Small turn angles use a series
/// expansion of the same integrals, which reduces to straight-line motion as
/// `φ̇ → 0`.
pub fn ctra_step(s: [f64; 6], dt: f64) -> [f64; 6] {
    let [x, y, v, a, phi, w] = s;
    let (ci, si) = turn_integrals(v, a, w, dt);
    let (sp, cp) = phi.sin_cos();
    [
        x + cp * ci - sp * si,
        y + sp * ci + cp * si,
        v + a * dt,
        a,
        normalize_angle(phi + w * dt),
        w,
    ]
}

/// Unscented CTRA prediction with additive `process_noise`.
pub fn ctra_predict(s: &KinematicState, dt: f64, process_noise: &Matrix6<f64>) -> KinematicState {
    let w = sigma_weights(6, &UkfParams::default());
    let x = DVector::from_row_slice(&s.vector());
    let p = DMatrix::from_iterator(6, 6, s.covariance.iter().copied());
    let ys: Vec<DVector<f64>> = sigma_points(&x, &p, &w)
        .iter()
        .map(|sp| {
            let arr: [f64; 6] = std::array::from_fn(|i| sp[i]);
            DVector::from_row_slice(&ctra_step(arr, dt))
        })
        .collect();
    let (m, c) = sigma_moments(&ys, &w, &[PHI]);
    let mut cov = Matrix6::from_iterator(c.iter().copied()) + process_noise;
    cov = (cov + cov.transpose()) * 0.5;
    let v = Vector6::from_iterator(m.iter().copied());
    KinematicState::new([v[0], v[1], v[2], v[3], v[4], v[5]], cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn deriv(s: [f64; 6]) -> [f64; 6] {
        let [_, _, v, a, phi, w] = s;
        [v * phi.cos(), v * phi.sin(), a, 0.0, w, 0.0]
    }

    /// Classic fourth-order Runge–Kutta on the CTRA ODEs.
    fn rk4(mut s: [f64; 6], dt: f64, steps: usize) -> [f64; 6] {
        let h = dt / steps as f64;
        let add = |s: [f64; 6], k: [f64; 6], f: f64| std::array::from_fn(|i| s[i] + f * k[i]);
        for _ in 0..steps {
            let k1 = deriv(s);
            let k2 = deriv(add(s, k1, h / 2.0));
            let k3 = deriv(add(s, k2, h / 2.0));
            let k4 = deriv(add(s, k3, h));
            s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        }
        s
    }

    #[test]
    fn straight_motion() {
        let s = ctra_step([0.0, 0.0, 10.0, 0.0, 0.0, 0.0], 1.0);
        assert_abs_diff_eq!(s[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_acceleration() {
        let s = ctra_step([0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 2.0);
        assert_abs_diff_eq!(s[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn half_circle_against_rk4() {
        let start = [0.0, 0.0, 10.0, 0.0, 0.0, PI / 2.0];
        let s = ctra_step(start, 2.0);
        let r = rk4(start, 2.0, 4000);
        // Heading turned by π; the arc has radius v/φ̇ = 20/π.
        assert_abs_diff_eq!(s[4].abs(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1], 2.0 * 20.0 / PI, epsilon = 1e-9);
        for i in 0..4 {
            assert_abs_diff_eq!(s[i], r[i], epsilon = 1e-6);
        }
    }

    #[test]
    fn predict_grows_covariance() {
        let s = KinematicState::new([0.0, 0.0, 10.0, 0.0, 0.3, 0.1], Matrix6::identity() * 1e-6);
        let q = Matrix6::identity() * 1e-4;
        let p = ctra_predict(&s, 0.1, &q);
        let m = ctra_step(s.vector(), 0.1);
        for i in 0..6 {
            assert_abs_diff_eq!(p.vector()[i], m[i], epsilon = 1e-4);
        }
        assert!((p.covariance - p.covariance.transpose()).amax() < 1e-12);
        assert!(p.covariance[(0, 0)] > s.covariance[(0, 0)]);
    }

    proptest! {
        #[test]
        fn matches_rk4(
            v in 0.0..30.0f64,
            a in -3.0..3.0f64,
            phi in -PI..PI,
            w in prop_oneof![-1.0..1.0f64, -1e-4..1e-4f64, Just(0.0)],
            dt in 0.01..0.5f64,
        ) {
            let start = [3.0, -4.0, v, a, phi, w];
            let s = ctra_step(start, dt);
            let r = rk4(start, dt, 200);
            for i in 0..4 {
                prop_assert!((s[i] - r[i]).abs() < 1e-6, "component {i}: {} vs {}", s[i], r[i]);
            }
            prop_assert!((normalize_angle(s[4] - r[4])).abs() < 1e-9);
        }

        #[test]
        fn conserved_quantities(v in 0.0..30.0f64, phi in -PI..PI, w in -1.0..1.0f64, dt in 0.01..0.5f64) {
            prop_assert_eq!(ctra_step([0.0, 0.0, v, 0.0, phi, w], dt)[2], v);
            prop_assert_eq!(ctra_step([0.0, 0.0, v, 0.5, phi, 0.0], dt)[4], phi);
        }
    }
}
