use serde::{Deserialize, Serialize};

use super::VehicleTruth;
use crate::eot::{contour_polygon, ContourModel, KinematicState, TrackHistory, TrackStatus};
use crate::geometry::{normalize_angle, Transform3};

/// Corners of a vehicle rectangle, counter-clockwise, for state
/// `[x, y, v, a, φ, φ̇]`.
pub fn footprint(state: &[f64; 6], length: f64, width: f64) -> [[f64; 2]; 4] {
    let (s, c) = state[4].sin_cos();
    let (hl, hw) = (length / 2.0, width / 2.0);
    [[hl, -hw], [hl, hw], [-hl, hw], [-hl, -hw]].map(|[bx, by]| [state[0] + c * bx - s * by, state[1] + s * bx + c * by])
}

/// Unsigned shoelace area.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum();
    twice.abs() / 2.0
}

/// Sutherland–Hodgman clipping of `subject` by the convex, counter-clockwise
/// polygon `clip`.
pub fn polygon_intersection(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(p), side(q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let f = sp / (sp - sq);
                out.push([p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1])]);
            }
        }
    }
    out
}

/// Intersection over union of a simple polygon and a convex
/// counter-clockwise polygon.
pub fn polygon_iou(a: &[[f64; 2]], convex: &[[f64; 2]]) -> f64 {
    let inter = polygon_area(&polygon_intersection(a, convex));
    let union = polygon_area(a) + polygon_area(convex) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

/// Planar error of an estimated pose against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
}

impl PoseError {
    pub fn within(&self, meters: f64, degrees: f64) -> bool {
        self.x.abs() <= meters && self.y.abs() <= meters && self.yaw_deg.abs() <= degrees
    }
}

pub fn pose_error(estimate: &Transform3, truth: &Transform3) -> PoseError {
    PoseError {
        x: estimate.translation.x - truth.translation.x,
        y: estimate.translation.y - truth.translation.y,
        yaw_deg: normalize_angle(estimate.yaw() - truth.yaw()).to_degrees(),
    }
}

/// Tracking accuracy over the confirmed frames of confirmed tracks, each
/// track scored against the vehicle nearest to it in most of its frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub tracks: usize,
    /// Distinct vehicles matched by some track.
    pub vehicles: usize,
    pub frames: usize,
    pub center_rms: f64,
    pub mean_yaw_error_deg: f64,
    pub mean_iou: f64,
}

pub fn evaluate_tracks(tracks: &[TrackHistory], truth: &[VehicleTruth], dt: f64, model: &ContourModel) -> TrackingMetrics {
    let mut matched = std::collections::BTreeSet::new();
    let (mut n, mut sq, mut yaw, mut iou, mut count) = (0usize, 0.0, 0.0, 0.0, 0usize);
    for track in tracks.iter().filter(|t| t.was_confirmed()) {
        let entries: Vec<_> = track.entries.iter().filter(|e| e.status == TrackStatus::Confirmed).collect();
        let mut votes = vec![0usize; truth.len()];
        for e in &entries {
            let nearest = truth
                .iter()
                .enumerate()
                .filter_map(|(i, v)| {
                    v.state_at(e.timestamp, dt)
                        .map(|s| (i, (s.state[0] - e.state[0]).hypot(s.state[1] - e.state[1])))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((i, _)) = nearest {
                votes[i] += 1;
            }
        }
        let Some((best, _)) = votes.iter().enumerate().filter(|(_, v)| **v > 0).max_by_key(|(i, v)| (**v, usize::MAX - i)) else {
            continue;
        };
        count += 1;
        matched.insert(best);
        let vehicle = &truth[best];
        for e in &entries {
            let Some(s) = vehicle.state_at(e.timestamp, dt) else {
                continue;
            };
            n += 1;
            sq += (s.state[0] - e.state[0]).powi(2) + (s.state[1] - e.state[1]).powi(2);
            yaw += normalize_angle(e.state[4] - s.state[4]).abs().to_degrees();
            let kin = KinematicState::new(e.state, nalgebra::Matrix6::zeros());
            let radii = nalgebra::DVector::from_column_slice(&e.radii);
            let contour = contour_polygon(&kin, &radii, model);
            iou += polygon_iou(&contour, &footprint(&s.state, vehicle.length, vehicle.width));
        }
    }
    let nf = n.max(1) as f64;
    TrackingMetrics {
        tracks: count,
        vehicles: matched.len(),
        frames: n,
        center_rms: (sq / nf).sqrt(),
        mean_yaw_error_deg: yaw / nf,
        mean_iou: iou / nf,
    }
}
