use nalgebra::{DMatrix, DVector};

use super::ctra::KinematicState;
use super::gp::{basis_angles, gp_gram, gram_cholesky, radius_at, regress_with, GpParams};
use crate::Result;

/// Radial contour at fixed body-frame basis angles.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourState {
    pub radii: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub basis_angles: Vec<f64>,
}

impl ContourState {
    /// Prior contour: every radius at the mean, covariance `K`.
    pub fn prior(p: &GpParams) -> Self {
        let basis_angles = basis_angles(p.n_theta);
        Self {
            radii: DVector::from_element(p.n_theta, p.mean_radius),
            covariance: gp_gram(&basis_angles, p),
            basis_angles,
        }
    }
}

/// Forgetting step: deviations from the prior mean decay by `e^{−τ·dt}` and
/// the covariance relaxes toward `K`.
pub fn contour_predict(c: &ContourState, dt: f64, p: &GpParams) -> ContourState {
    let d = (-p.tau * dt).exp();
    let k = gp_gram(&c.basis_angles, p);
    ContourState {
        radii: c.radii.map(|r| p.mean_radius + d * (r - p.mean_radius)),
        covariance: &c.covariance * (d * d) + k * (1.0 - d * d),
        basis_angles: c.basis_angles.clone(),
    }
}

/// GP interpolation weights and residual variances at a fixed set of
/// body-frame query angles.
#[derive(Debug, Clone)]
pub struct ContourModel {
    pub params: GpParams,
    pub basis: Vec<f64>,
    pub gram: DMatrix<f64>,
    pub query_angles: Vec<f64>,
    /// Row `j` holds the weights for `query_angles[j]`.
    pub weights: Vec<DVector<f64>>,
    pub residual_variance: Vec<f64>,
}

impl ContourModel {
    pub fn new(params: &GpParams, n_query: usize) -> Result<Self> {
        params.validate()?;
        let basis = basis_angles(params.n_theta);
        let chol = gram_cholesky(&basis, params)?;
        let query_angles = basis_angles(n_query);
        let (weights, residual_variance) = query_angles
            .iter()
            .map(|&q| {
                let (w, v) = regress_with(&chol, q, &basis, params);
                (w, v.max(0.0))
            })
            .unzip();
        Ok(Self {
            params: *params,
            gram: gp_gram(&basis, params),
            basis,
            query_angles,
            weights,
            residual_variance,
        })
    }

    pub fn radius(&self, j: usize, radii: &DVector<f64>) -> f64 {
        radius_at(&self.weights[j], radii, self.params.mean_radius)
    }

    /// Radius at an arbitrary body angle, linearly interpolated between the
    /// two neighboring query angles.
    pub fn radius_at_angle(&self, angle: f64, radii: &DVector<f64>) -> f64 {
        self.radius_and_slope(angle, radii).0
    }

    /// Interpolated radius and its derivative with respect to the angle.
    pub fn radius_and_slope(&self, angle: f64, radii: &DVector<f64>) -> (f64, f64) {
        let n = self.query_angles.len();
        let u = angle.rem_euclid(std::f64::consts::TAU) * n as f64 / std::f64::consts::TAU;
        let j = (u.floor() as usize).min(n - 1);
        let f = u - j as f64;
        let (r0, r1) = (self.radius(j, radii), self.radius((j + 1) % n, radii));
        ((1.0 - f) * r0 + f * r1, (r1 - r0) * n as f64 / std::f64::consts::TAU)
    }
}

/// A potential reflection spot on the predicted contour.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub position: [f64; 2],
    /// Index into the model's query angles.
    pub index: usize,
    pub body_angle: f64,
    pub visible: bool,
}

/// Evaluates the contour at the model's query angles. A candidate is visible
/// when its outward radial direction points toward the sensor.
pub fn generate_candidates(
    s: &KinematicState,
    radii: &DVector<f64>,
    model: &ContourModel,
    sensor_xy: [f64; 2],
) -> Vec<Candidate> {
    model
        .query_angles
        .iter()
        .enumerate()
        .map(|(j, &theta)| {
            let g = theta + s.phi;
            let (sg, cg) = g.sin_cos();
            let r = model.radius(j, radii);
            let position = [s.x + cg * r, s.y + sg * r];
            let to_sensor = [sensor_xy[0] - position[0], sensor_xy[1] - position[1]];
            Candidate {
                position,
                index: j,
                body_angle: theta,
                visible: cg * to_sensor[0] + sg * to_sensor[1] > 0.0,
            }
        })
        .collect()
}

/// Samples the contour polygon in the global frame.
pub fn contour_polygon(s: &KinematicState, radii: &DVector<f64>, model: &ContourModel) -> Vec<[f64; 2]> {
    (0..model.query_angles.len())
        .map(|j| {
            let g = model.query_angles[j] + s.phi;
            let r = model.radius(j, radii);
            [s.x + g.cos() * r, s.y + g.sin() * r]
        })
        .collect()
}
