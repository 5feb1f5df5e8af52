use std::f64::consts::{PI, TAU};
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Rotation3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{LabeledCloud, LabeledPoint, PointCloud, RadarPoint};
use crate::{Error, Result};

/// Wraps an angle into `(-π, π]`. Angles already in range are returned untouched.
pub fn normalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Rigid transform in SE(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, kept in `(-π, π]`.
    pub yaw: f64,
}

impl Default for Pose2 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose2 {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn identity() -> Self {
        Self { x: 0.0, y: 0.0, yaw: 0.0 }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2::new(
            c * other.x - s * other.y + self.x,
            s * other.x + c * other.y + self.y,
            self.yaw + other.yaw,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.yaw.sin_cos();
        Pose2::new(-(c * self.x + s * self.y), s * self.x - c * self.y, -self.yaw)
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw.sin_cos();
        [c * p[0] - s * p[1] + self.x, s * p[0] + c * p[1] + self.y]
    }

    /// Lifts to SE(3): rotation about the vertical axis, zero z-translation.
    pub fn to_transform3(&self) -> Transform3 {
        Transform3 {
            rotation: *Rotation3::from_axis_angle(&Vector3::z_axis(), self.yaw).matrix(),
            translation: Vector3::new(self.x, self.y, 0.0),
        }
    }
}

impl Mul for Pose2 {
    type Output = Pose2;

    fn mul(self, rhs: Pose2) -> Pose2 {
        self.compose(&rhs)
    }
}

/// Rigid transform in SE(3) as a rotation matrix and a translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform3 {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Transform3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Transform3 {
    /// Validates that `rotation` is a proper rotation within 1e-9.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if !(ortho <= 1e-9 && (det - 1.0).abs() <= 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "not a rotation matrix (orthogonality error {ortho:e}, det {det})"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Builds `R = Rz(yaw) · Ry(pitch) · Rx(roll)` with the given translation.
    pub fn from_euler(translation: [f64; 3], roll: f64, pitch: f64, yaw: f64) -> Self {
        Self {
            rotation: *Rotation3::from_euler_angles(roll, pitch, yaw).matrix(),
            translation: Vector3::from(translation),
        }
    }

    /// `(roll, pitch, yaw)` of the ZYX decomposition.
    pub fn euler_angles(&self) -> (f64, f64, f64) {
        Rotation3::from_matrix_unchecked(self.rotation).euler_angles()
    }

    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Transform3) -> Transform3 {
        Transform3 {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Transform3 {
        let rt = self.rotation.transpose();
        Transform3 {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let q = self.rotation * Vector3::from(p) + self.translation;
        [q.x, q.y, q.z]
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Projects onto SE(2) by keeping the xy translation and the yaw.
    pub fn to_pose2(&self) -> Pose2 {
        Pose2::new(self.translation.x, self.translation.y, self.yaw())
    }
}

impl Mul for Transform3 {
    type Output = Transform3;

    fn mul(self, rhs: Transform3) -> Transform3 {
        self.compose(&rhs)
    }
}

#[derive(Serialize, Deserialize)]
struct Transform3Repr {
    r: [[f64; 3]; 3],
    t: [f64; 3],
}

impl Serialize for Transform3 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.rotation[(i, j)];
            }
        }
        Transform3Repr {
            r,
            t: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Transform3 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = Transform3Repr::deserialize(deserializer)?;
        let rotation = Matrix3::from_fn(|i, j| repr.r[i][j]);
        Transform3::new(rotation, Vector3::from(repr.t)).map_err(serde::de::Error::custom)
    }
}

/// `T_utm = T̃_fine · T_coarse`, with `T_fine` lifted to a rotation about the
/// vertical axis and zero z-translation.
pub fn compose_final(t_fine: &Pose2, t_coarse: &Transform3) -> Transform3 {
    t_fine.to_transform3().compose(t_coarse)
}

/// Anything that maps a 3D point rigidly.
pub trait RigidTransform {
    fn apply_point(&self, p: [f64; 3]) -> [f64; 3];
}

impl RigidTransform for Transform3 {
    fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        self.apply(p)
    }
}

impl RigidTransform for Pose2 {
    fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let [x, y] = self.apply([p[0], p[1]]);
        [x, y, p[2]]
    }
}

/// Maps every point; range rates pass through.
pub fn transform_cloud<T: RigidTransform + ?Sized>(t: &T, cloud: &PointCloud) -> PointCloud {
    cloud
        .iter()
        .map(|p| {
            let [x, y, z] = t.apply_point(p.position());
            RadarPoint::new(x, y, z, p.range_rate)
        })
        .collect()
}

/// Maps every point; labels pass through.
pub fn transform_labeled_cloud<T: RigidTransform + ?Sized>(t: &T, cloud: &LabeledCloud) -> LabeledCloud {
    cloud
        .iter()
        .map(|p| {
            let [x, y, z] = t.apply_point(p.position());
            LabeledPoint::new(x, y, z, p.label)
        })
        .collect()
}
