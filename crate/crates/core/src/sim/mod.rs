//! Synthetic scenarios with ground truth: lane geometry, a road-surface
//! cloud, vehicles driven along routes, and radar frames rendered from a
//! known sensor pose.

mod metrics;
mod render;

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coarse::RadarFrame;
use crate::geometry::{PointCloud, RadarPoint, Transform3};
use crate::laneletmap::{point_in_polygon, Lanelet, LaneletMap};
use crate::{Error, Result};

pub use metrics::{evaluate_tracks, footprint, polygon_area, polygon_intersection, polygon_iou, pose_error, PoseError, TrackingMetrics};
pub use render::render_radar;

/// Spacing of the road-surface grid, meters.
pub const ALS_SPACING: f64 = 0.5;
/// Height noise of the road-surface cloud, meters.
pub const ALS_Z_STD: f64 = 0.02;
/// Bound sample spacing, meters.
const BOUND_STEP: f64 = 1.0;
const CONTINUITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Straight { length: f64 },
    /// Positive angles turn left (counter-clockwise).
    Arc { radius: f64, angle_deg: f64 },
}

/// A chain of segments starting at a pose; one lanelet per segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneSpec {
    pub name: String,
    pub start: [f64; 2],
    pub heading_deg: f64,
    pub width: f64,
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorSpec {
    /// Position in local scenario coordinates (before `origin`).
    pub position: [f64; 3],
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub fov_horizontal_deg: f64,
    pub fov_vertical_deg: f64,
    pub max_range: f64,
    pub min_range: f64,
    pub points_per_second: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            position: [0.0, 0.0, 5.0],
            roll_deg: 0.0,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
            fov_horizontal_deg: 120.0,
            fov_vertical_deg: 30.0,
            max_range: 100.0,
            min_range: 0.5,
            points_per_second: 10000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// Isotropic position noise, meters; truncated at 3σ.
    pub position_std: f64,
    pub range_rate_std: f64,
    /// Static returns per frame scattered over the field of view.
    pub clutter_per_frame: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            position_std: 0.3,
            range_rate_std: 0.1,
            clutter_per_frame: 0,
        }
    }
}

/// Constant speed, or `[time offset, speed]` knots interpolated linearly and
/// held after the last knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Speed {
    Constant(f64),
    Profile(Vec<[f64; 2]>),
}

impl Speed {
    fn knots(&self) -> Vec<[f64; 2]> {
        match self {
            Speed::Constant(v) => vec![[0.0, *v]],
            Speed::Profile(k) => k.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSpec {
    pub route: String,
    pub start_time: f64,
    pub speed: Speed,
    #[serde(default)]
    pub length: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
}

/// `count` vehicles on one route, `interval` seconds apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub route: String,
    pub start_time: f64,
    pub interval: f64,
    pub count: usize,
    pub speed: Speed,
}

fn default_zone() -> String {
    "32U".into()
}
fn default_als_seed() -> u64 {
    7
}
fn default_frame_period() -> f64 {
    0.05
}
fn default_length() -> f64 {
    4.5
}
fn default_width() -> f64 {
    1.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "default_zone")]
    pub utm_zone: String,
    /// Added to every local coordinate.
    #[serde(default)]
    pub origin: [f64; 2],
    /// Seed of the radar noise.
    #[serde(default)]
    pub seed: u64,
    /// Seed of the road-surface height noise, kept apart from `seed` so that
    /// the map and cloud do not change with it.
    #[serde(default = "default_als_seed")]
    pub als_seed: u64,
    pub duration: f64,
    #[serde(default = "default_frame_period")]
    pub frame_period: f64,
    pub lanes: Vec<LaneSpec>,
    /// Route name to lane names, driven in order. A lane name alone is also
    /// a valid route.
    #[serde(default)]
    pub routes: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub sensor: SensorSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_length")]
    pub vehicle_length: f64,
    #[serde(default = "default_width")]
    pub vehicle_width: f64,
    #[serde(default)]
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub flows: Vec<FlowSpec>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec = Self::from_json(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("spec serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        if !(s.fov_horizontal_deg > 0.0 && s.fov_horizontal_deg < 360.0) {
            return Err(invalid(format!("horizontal FOV {} not in (0, 360)", s.fov_horizontal_deg)));
        }
        if !(s.fov_vertical_deg > 0.0 && s.fov_vertical_deg < 360.0) {
            return Err(invalid(format!("vertical FOV {} not in (0, 360)", s.fov_vertical_deg)));
        }
        if !(s.max_range > s.min_range && s.min_range >= 0.0 && s.points_per_second >= 0.0) {
            return Err(invalid("sensor range or point rate out of bounds"));
        }
        if !(self.duration >= 0.0 && self.frame_period > 0.0) {
            return Err(invalid("duration must be non-negative and frame_period positive"));
        }
        if !(self.noise.position_std >= 0.0 && self.noise.range_rate_std >= 0.0) {
            return Err(invalid("noise std must be non-negative"));
        }
        if !(self.vehicle_length > 0.0 && self.vehicle_width > 0.0) {
            return Err(invalid("vehicle size must be positive"));
        }
        let mut names = std::collections::HashSet::new();
        for lane in &self.lanes {
            if !names.insert(lane.name.as_str()) {
                return Err(invalid(format!("duplicate lane {}", lane.name)));
            }
            if !(lane.width > 0.0) || lane.segments.is_empty() {
                return Err(invalid(format!("lane {}: needs a positive width and a segment", lane.name)));
            }
            for seg in &lane.segments {
                let ok = match *seg {
                    Segment::Straight { length } => length > 0.0,
                    Segment::Arc { radius, angle_deg } => {
                        radius > lane.width / 2.0 && angle_deg != 0.0 && angle_deg.abs() < 360.0
                    }
                };
                if !ok {
                    return Err(invalid(format!("lane {}: bad segment {seg:?}", lane.name)));
                }
            }
        }
        for name in self.routes.keys() {
            self.route_path(name)?;
        }
        let check_speed = |speed: &Speed| -> Result<()> {
            let knots = speed.knots();
            let sorted = knots.windows(2).all(|w| w[0][0] < w[1][0]);
            if knots.is_empty() || !sorted || knots.iter().any(|k| !(k[1] >= 0.0) || !(k[0] >= 0.0)) {
                return Err(invalid(format!("bad speed profile {speed:?}")));
            }
            Ok(())
        };
        for v in &self.vehicles {
            self.route_path(&v.route)?;
            check_speed(&v.speed)?;
            if v.length.is_some_and(|l| !(l > 0.0)) || v.width.is_some_and(|w| !(w > 0.0)) {
                return Err(invalid("vehicle size must be positive"));
            }
        }
        for f in &self.flows {
            self.route_path(&f.route)?;
            check_speed(&f.speed)?;
            if !(f.interval > 0.0) {
                return Err(invalid("flow interval must be positive"));
            }
        }
        Ok(())
    }

    /// Ground-truth sensor pose in UTM.
    pub fn sensor_pose(&self) -> Transform3 {
        let s = &self.sensor;
        Transform3::from_euler(
            [s.position[0] + self.origin[0], s.position[1] + self.origin[1], s.position[2]],
            s.roll_deg.to_radians(),
            s.pitch_deg.to_radians(),
            s.yaw_deg.to_radians(),
        )
    }

    fn lane(&self, name: &str) -> Option<&LaneSpec> {
        self.lanes.iter().find(|l| l.name == name)
    }

    /// Centerline of a route in UTM, checked for continuity between lanes.
    pub fn route_path(&self, route: &str) -> Result<Path2> {
        let names: Vec<&str> = match self.routes.get(route) {
            Some(list) => list.iter().map(String::as_str).collect(),
            None if self.lane(route).is_some() => vec![route],
            None => return Err(invalid(format!("unknown route {route}"))),
        };
        let mut pieces: Vec<Piece> = Vec::new();
        for name in names {
            let lane = self.lane(name).ok_or_else(|| invalid(format!("route {route}: unknown lane {name}")))?;
            let lane_pieces = lane_pieces(lane, self.origin);
            if let (Some(prev), Some(next)) = (pieces.last(), lane_pieces.first()) {
                let (end, heading) = prev.end();
                let gap = (end[0] - next.start[0]).hypot(end[1] - next.start[1]);
                let turn = crate::geometry::normalize_angle(next.heading - heading).abs();
                if gap > CONTINUITY_TOL || turn > CONTINUITY_TOL {
                    return Err(invalid(format!(
                        "route {route}: lane {name} does not continue the previous lane (gap {gap:.3e} m, heading step {turn:.3e} rad)"
                    )));
                }
            }
            pieces.extend(lane_pieces);
        }
        Ok(Path2 { pieces })
    }

    /// Every scheduled vehicle, flows expanded, in start-time order.
    pub fn schedule(&self) -> Vec<VehicleSpec> {
        let mut out = self.vehicles.clone();
        for f in &self.flows {
            for k in 0..f.count {
                out.push(VehicleSpec {
                    route: f.route.clone(),
                    start_time: f.start_time + k as f64 * f.interval,
                    speed: f.speed.clone(),
                    length: None,
                    width: None,
                });
            }
        }
        out.sort_by(|a, b| a.start_time.total_cmp(&b.start_time));
        out
    }

    /// Frame timestamps `k·frame_period` within `[0, duration]`.
    pub fn frame_times(&self) -> Vec<f64> {
        let n = (self.duration / self.frame_period + 1e-9).floor() as usize;
        (0..=n).map(|k| k as f64 * self.frame_period).collect()
    }
}

/// A straight or constant-curvature piece of a centerline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub start: [f64; 2],
    pub heading: f64,
    pub length: f64,
    /// Signed curvature, positive to the left.
    pub curvature: f64,
}

impl Piece {
    /// Position and heading `s` meters along the piece.
    pub fn at(&self, s: f64) -> ([f64; 2], f64) {
        let (x0, y0, h0, k) = (self.start[0], self.start[1], self.heading, self.curvature);
        if k == 0.0 {
            return ([x0 + s * h0.cos(), y0 + s * h0.sin()], h0);
        }
        let h = h0 + k * s;
        ([x0 + (h.sin() - h0.sin()) / k, y0 - (h.cos() - h0.cos()) / k], h)
    }

    pub fn end(&self) -> ([f64; 2], f64) {
        self.at(self.length)
    }
}

fn lane_pieces(lane: &LaneSpec, origin: [f64; 2]) -> Vec<Piece> {
    let mut start = [lane.start[0] + origin[0], lane.start[1] + origin[1]];
    let mut heading = lane.heading_deg.to_radians();
    lane.segments
        .iter()
        .map(|seg| {
            let piece = match *seg {
                Segment::Straight { length } => Piece { start, heading, length, curvature: 0.0 },
                Segment::Arc { radius, angle_deg } => Piece {
                    start,
                    heading,
                    length: radius * angle_deg.abs().to_radians(),
                    curvature: angle_deg.signum() / radius,
                },
            };
            let (end, h) = piece.end();
            start = end;
            heading = h;
            piece
        })
        .collect()
}

/// Arc-length parametrized centerline made of pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Path2 {
    pub pieces: Vec<Piece>,
}

impl Path2 {
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length).sum()
    }

    /// Position, heading and curvature at arc length `s`, clamped to the path.
    pub fn at(&self, s: f64) -> ([f64; 2], f64, f64) {
        let mut left = s.max(0.0);
        for (i, p) in self.pieces.iter().enumerate() {
            if left <= p.length || i + 1 == self.pieces.len() {
                let (pos, h) = p.at(left.min(p.length));
                return (pos, h, p.curvature);
            }
            left -= p.length;
        }
        ([0.0, 0.0], 0.0, 0.0)
    }
}

/// Lanelets per segment (bounds at ±width/2, sampled about every meter) and
/// the road-surface cloud on a 0.5 m grid with Gaussian height noise.
pub fn build_map(spec: &ScenarioSpec) -> Result<(LaneletMap, PointCloud)> {
    spec.validate()?;
    let mut lanelets = Vec::new();
    for lane in &spec.lanes {
        for piece in lane_pieces(lane, spec.origin) {
            let n = ((piece.length / BOUND_STEP).ceil() as usize).max(1);
            let half = lane.width / 2.0;
            let (mut left, mut right) = (Vec::with_capacity(n + 1), Vec::with_capacity(n + 1));
            for i in 0..=n {
                let (p, h) = piece.at(piece.length * i as f64 / n as f64);
                let (nx, ny) = (-h.sin(), h.cos());
                left.push([p[0] + half * nx, p[1] + half * ny]);
                right.push([p[0] - half * nx, p[1] - half * ny]);
            }
            lanelets.push(Lanelet::new(lanelets.len() as i64 + 1, left, right));
        }
    }
    let map = LaneletMap {
        utm_zone: spec.utm_zone.clone(),
        lanelets,
    };
    map.validate()?;
    let als = road_surface(&map, spec.als_seed);
    Ok((map, als))
}

fn road_surface(map: &LaneletMap, seed: u64) -> PointCloud {
    let polys: Vec<(Vec<[f64; 2]>, [f64; 4])> = map
        .lanelets
        .iter()
        .map(|l| {
            let poly = l.polygon();
            let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
            for p in &poly {
                b = [b[0].min(p[0]), b[1].min(p[1]), b[2].max(p[0]), b[3].max(p[1])];
            }
            (poly, b)
        })
        .collect();
    let bbox = polys.iter().fold(
        [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
        |a, (_, b)| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, ALS_Z_STD).expect("valid std");
    let mut cloud = PointCloud::new();
    if polys.is_empty() {
        return cloud;
    }
    let (i0, i1) = ((bbox[0] / ALS_SPACING).floor() as i64, (bbox[2] / ALS_SPACING).ceil() as i64);
    let (j0, j1) = ((bbox[1] / ALS_SPACING).floor() as i64, (bbox[3] / ALS_SPACING).ceil() as i64);
    for j in j0..=j1 {
        let y = j as f64 * ALS_SPACING;
        for i in i0..=i1 {
            let x = i as f64 * ALS_SPACING;
            let inside = polys.iter().any(|(poly, b)| {
                x >= b[0] && x <= b[2] && y >= b[1] && y <= b[3] && point_in_polygon([x, y], poly)
            });
            if inside {
                cloud.push(RadarPoint::new(x, y, noise.sample(&mut rng), 0.0));
            }
        }
    }
    cloud
}

/// One sample of a vehicle's true motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthState {
    pub t: f64,
    /// `[x, y, v, a, φ, φ̇]`.
    pub state: [f64; 6],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTruth {
    pub id: usize,
    pub route: String,
    pub length: f64,
    pub width: f64,
    pub states: Vec<TruthState>,
}

impl VehicleTruth {
    /// State at a time on the simulation grid, if the vehicle exists then.
    pub fn state_at(&self, t: f64, dt: f64) -> Option<&TruthState> {
        let first = self.states.first()?;
        let k = ((t - first.t) / dt).round();
        if k < 0.0 {
            return None;
        }
        self.states.get(k as usize).filter(|s| (s.t - t).abs() < dt * 1e-3)
    }
}

/// Distance travelled and speed at `t` seconds after start, for a piecewise
/// linear speed profile held constant after the last knot.
fn travel(knots: &[[f64; 2]], t: f64) -> (f64, f64, f64) {
    let mut s = 0.0;
    let mut prev = [0.0, knots[0][1]];
    for k in knots.iter().skip_while(|k| k[0] <= 0.0) {
        if t <= k[0] {
            let a = (k[1] - prev[1]) / (k[0] - prev[0]);
            let dt = t - prev[0];
            return (s + prev[1] * dt + 0.5 * a * dt * dt, prev[1] + a * dt, a);
        }
        s += 0.5 * (prev[1] + k[1]) * (k[0] - prev[0]);
        prev = *k;
    }
    (s + prev[1] * (t - prev[0]), prev[1], 0.0)
}

/// Drives every scheduled vehicle along its route on the frame grid. Heading
/// is tangent to the centerline and the yaw rate is curvature times speed.
/// A vehicle exists from its first grid time at or after `start_time` until
/// it reaches the end of its route or the scenario ends.
pub fn simulate_vehicles(spec: &ScenarioSpec) -> Result<Vec<VehicleTruth>> {
    spec.validate()?;
    let dt = spec.frame_period;
    let times = spec.frame_times();
    spec.schedule()
        .iter()
        .enumerate()
        .map(|(id, v)| {
            let path = spec.route_path(&v.route)?;
            let total = path.length();
            let knots = v.speed.knots();
            let mut states = Vec::new();
            let first = (v.start_time / dt - 1e-9).ceil().max(0.0) as usize;
            for &t in times.iter().skip(first) {
                let (s, speed, accel) = travel(&knots, t - v.start_time);
                if s > total {
                    break;
                }
                let (p, heading, curvature) = path.at(s);
                states.push(TruthState {
                    t,
                    state: [p[0], p[1], speed, accel, crate::geometry::normalize_angle(heading), curvature * speed],
                });
            }
            Ok(VehicleTruth {
                id,
                route: v.route.clone(),
                length: v.length.unwrap_or(spec.vehicle_length),
                width: v.width.unwrap_or(spec.vehicle_width),
                states,
            })
        })
        .collect()
}

/// Everything a test harness needs to score a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub sensor_pose: Transform3,
    pub frame_period: f64,
    pub vehicles: Vec<VehicleTruth>,
    #[serde(skip)]
    pub map: LaneletMap,
    #[serde(skip)]
    pub als: PointCloud,
}

impl ScenarioTruth {
    /// Reads the pose and vehicle histories; map and cloud stay empty.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
    }

    /// Writes the pose and vehicle histories.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).expect("truth serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// A generated scenario: truth plus the rendered recording.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub truth: ScenarioTruth,
    pub frames: Vec<RadarFrame>,
}

/// Builds the map, drives the vehicles and renders the whole duration.
pub fn generate(spec: &ScenarioSpec) -> Result<Scenario> {
    let (map, als) = build_map(spec)?;
    let truth = ScenarioTruth {
        sensor_pose: spec.sensor_pose(),
        frame_period: spec.frame_period,
        vehicles: simulate_vehicles(spec)?,
        map,
        als,
    };
    let frames = render_radar(spec, &truth, 0.0, spec.duration)?;
    Ok(Scenario { truth, frames })
}
