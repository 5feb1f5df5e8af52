//! Rigid transforms, point clouds and the small set of cloud operations shared
//! by both registration stages.

mod align;
mod dbscan;
mod index;
pub mod io;
mod transform;
mod voxel;

use serde::{Deserialize, Serialize};

pub use align::{align_rigid_2d, align_rigid_3d};
pub use dbscan::dbscan_filter;
pub use index::GridIndex;
pub use transform::{
    compose_final, normalize_angle, transform_cloud, transform_labeled_cloud, Pose2,
    RigidTransform, Transform3,
};
pub use voxel::{voxel_downsample, voxel_downsample_labeled};

/// A radar return in the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Radial (Doppler) velocity in m/s, positive when receding.
    pub range_rate: f64,
}

impl RadarPoint {
    pub fn new(x: f64, y: f64, z: f64, range_rate: f64) -> Self {
        Self { x, y, z, range_rate }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.range_rate.is_finite()
    }
}

/// Driving behavior attached to road and trajectory points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BehaviorLabel {
    #[serde(rename = "L")]
    LeftTurn,
    #[serde(rename = "R")]
    RightTurn,
    #[serde(rename = "S")]
    Straight,
}

impl BehaviorLabel {
    pub const ALL: [BehaviorLabel; 3] = [
        BehaviorLabel::LeftTurn,
        BehaviorLabel::RightTurn,
        BehaviorLabel::Straight,
    ];

    /// Dense index in `0..3`, matching the order of [`BehaviorLabel::ALL`].
    pub fn index(self) -> usize {
        match self {
            BehaviorLabel::LeftTurn => 0,
            BehaviorLabel::RightTurn => 1,
            BehaviorLabel::Straight => 2,
        }
    }

    pub fn code(self) -> char {
        match self {
            BehaviorLabel::LeftTurn => 'L',
            BehaviorLabel::RightTurn => 'R',
            BehaviorLabel::Straight => 'S',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "L" => Some(BehaviorLabel::LeftTurn),
            "R" => Some(BehaviorLabel::RightTurn),
            "S" => Some(BehaviorLabel::Straight),
            _ => None,
        }
    }

    /// Left and right swap, straight stays.
    pub fn mirrored(self) -> Self {
        match self {
            BehaviorLabel::LeftTurn => BehaviorLabel::RightTurn,
            BehaviorLabel::RightTurn => BehaviorLabel::LeftTurn,
            BehaviorLabel::Straight => BehaviorLabel::Straight,
        }
    }
}

impl std::fmt::Display for BehaviorLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// A registration point carrying a behavior label, in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub label: BehaviorLabel,
}

impl LabeledPoint {
    pub fn new(x: f64, y: f64, z: f64, label: BehaviorLabel) -> Self {
        Self { x, y, z, label }
    }

    pub fn position(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

macro_rules! cloud_type {
    ($(#[$meta:meta])* $name:ident, $point:ty) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq)]
        pub struct $name {
            pub points: Vec<$point>,
        }

        impl $name {
            pub fn new() -> Self {
                Self::default()
            }

            pub fn len(&self) -> usize {
                self.points.len()
            }

            pub fn is_empty(&self) -> bool {
                self.points.is_empty()
            }

            pub fn push(&mut self, p: $point) {
                self.points.push(p);
            }

            pub fn iter(&self) -> std::slice::Iter<'_, $point> {
                self.points.iter()
            }

            pub fn extend_from(&mut self, other: &$name) {
                self.points.extend_from_slice(&other.points);
            }

            pub fn positions(&self) -> Vec<[f64; 3]> {
                self.points.iter().map(|p| p.position()).collect()
            }
        }

        impl From<Vec<$point>> for $name {
            fn from(points: Vec<$point>) -> Self {
                Self { points }
            }
        }

        impl FromIterator<$point> for $name {
            fn from_iter<I: IntoIterator<Item = $point>>(iter: I) -> Self {
                Self { points: iter.into_iter().collect() }
            }
        }

        impl IntoIterator for $name {
            type Item = $point;
            type IntoIter = std::vec::IntoIter<$point>;

            fn into_iter(self) -> Self::IntoIter {
                self.points.into_iter()
            }
        }

        impl<'a> IntoIterator for &'a $name {
            type Item = &'a $point;
            type IntoIter = std::slice::Iter<'a, $point>;

            fn into_iter(self) -> Self::IntoIter {
                self.points.iter()
            }
        }
    };
}

cloud_type!(
    /// Ordered radar returns.
    PointCloud,
    RadarPoint
);
cloud_type!(
    /// Ordered labeled points.
    LabeledCloud,
    LabeledPoint
);

impl LabeledCloud {
    /// Point counts indexed by [`BehaviorLabel::index`].
    pub fn label_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for p in &self.points {
            counts[p.label.index()] += 1;
        }
        counts
    }
}
