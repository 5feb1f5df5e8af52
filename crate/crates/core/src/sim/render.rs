use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;

use super::{ScenarioSpec, ScenarioTruth, SensorSpec, VehicleTruth};
use crate::coarse::RadarFrame;
use crate::geometry::{PointCloud, RadarPoint, Transform3};
use crate::{Error, Result};

/// Reflection heights above the road, meters.
const Z_RANGE: (f64, f64) = (0.3, 1.2);

/// Range and azimuth check in the sensor frame.
fn in_footprint(s: &SensorSpec, q: [f64; 3]) -> bool {
    let range = q[0].hypot(q[1]).hypot(q[2]);
    range >= s.min_range && range <= s.max_range && q[1].atan2(q[0]).abs().to_degrees() <= s.fov_horizontal_deg / 2.0
}

fn in_fov(s: &SensorSpec, q: [f64; 3]) -> bool {
    in_footprint(s, q) && q[2].atan2(q[0].hypot(q[1])).abs().to_degrees() <= s.fov_vertical_deg / 2.0
}

/// Footprint edges whose outward normal faces the sensor, as
/// `(start, end)` pairs in the plane.
fn facing_edges(corners: &[[f64; 2]; 4], sensor: [f64; 2]) -> Vec<([f64; 2], [f64; 2])> {
    (0..4)
        .filter_map(|i| {
            let (a, b) = (corners[i], corners[(i + 1) % 4]);
            // Corners run counter-clockwise, so the outward normal is the
            // edge direction turned clockwise.
            let n = [b[1] - a[1], a[0] - b[0]];
            let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            (n[0] * (sensor[0] - mid[0]) + n[1] * (sensor[1] - mid[1]) > 0.0).then_some((a, b))
        })
        .collect()
}

fn truncated_noise(rng: &mut ChaCha8Rng, std: f64) -> [f64; 3] {
    if std == 0.0 {
        return [0.0; 3];
    }
    loop {
        let e: [f64; 3] = std::array::from_fn(|_| StandardNormal.sample(rng));
        if e.iter().map(|v| v * v).sum::<f64>() <= 9.0 {
            return e.map(|v| v * std);
        }
    }
}

/// Range rate of a body-fixed point `p` of a vehicle in state `s`, seen from
/// `sensor`: the radial component of the point's velocity.
pub(crate) fn point_range_rate(s: &[f64; 6], p: [f64; 3], sensor: [f64; 3]) -> f64 {
    let (v, phi, omega) = (s[2], s[4], s[5]);
    let vel = [v * phi.cos() - omega * (p[1] - s[1]), v * phi.sin() + omega * (p[0] - s[0]), 0.0];
    let d = [p[0] - sensor[0], p[1] - sensor[1], p[2] - sensor[2]];
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    (d[0] * vel[0] + d[1] * vel[1] + d[2] * vel[2]) / norm
}

struct Visible<'a> {
    state: &'a [f64; 6],
    edges: Vec<([f64; 2], [f64; 2])>,
}

fn render_frame(spec: &ScenarioSpec, truth: &ScenarioTruth, inv: &Transform3, k: usize, t: f64) -> RadarFrame {
    let sensor = truth.sensor_pose.translation;
    let sensor = [sensor.x, sensor.y, sensor.z];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(k as u64);

    let visible: Vec<Visible> = truth
        .vehicles
        .iter()
        .filter_map(|v: &VehicleTruth| {
            let st = v.state_at(t, truth.frame_period)?;
            let center = inv.apply([st.state[0], st.state[1], (Z_RANGE.0 + Z_RANGE.1) / 2.0]);
            if !in_footprint(&spec.sensor, center) {
                return None;
            }
            let corners = super::footprint(&st.state, v.length, v.width);
            let edges = facing_edges(&corners, [sensor[0], sensor[1]]);
            (!edges.is_empty()).then_some(Visible { state: &st.state, edges })
        })
        .collect();

    let budget = (spec.sensor.points_per_second * spec.frame_period).round() as usize;
    let rr_noise = Normal::new(0.0, spec.noise.range_rate_std).expect("valid std");
    let mut points = PointCloud::new();
    for (i, vis) in visible.iter().enumerate() {
        let share = budget / visible.len() + usize::from(i < budget % visible.len());
        let lengths: Vec<f64> = vis.edges.iter().map(|(a, b)| (b[0] - a[0]).hypot(b[1] - a[1])).collect();
        let total: f64 = lengths.iter().sum();
        for _ in 0..share {
            let mut u = rng.random::<f64>() * total;
            let mut e = 0;
            while e + 1 < lengths.len() && u > lengths[e] {
                u -= lengths[e];
                e += 1;
            }
            let (a, b) = vis.edges[e];
            let f = (u / lengths[e]).clamp(0.0, 1.0);
            let z = rng.random_range(Z_RANGE.0..Z_RANGE.1);
            let p = [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]), z];
            let rr = point_range_rate(vis.state, p, sensor) + rr_noise.sample(&mut rng);
            let n = truncated_noise(&mut rng, spec.noise.position_std);
            let q = inv.apply([p[0] + n[0], p[1] + n[1], p[2] + n[2]]);
            if in_fov(&spec.sensor, q) {
                points.push(RadarPoint::new(q[0], q[1], q[2], rr));
            }
        }
    }
    let s = &spec.sensor;
    for _ in 0..spec.noise.clutter_per_frame {
        let az = rng.random_range(-0.5..0.5) * s.fov_horizontal_deg.to_radians();
        let el = rng.random_range(-0.5..0.5) * s.fov_vertical_deg.to_radians();
        let r = rng.random_range(s.min_range..s.max_range);
        let q = [r * el.cos() * az.cos(), r * el.cos() * az.sin(), r * el.sin()];
        points.push(RadarPoint::new(q[0], q[1], q[2], rr_noise.sample(&mut rng)));
    }
    RadarFrame { timestamp: t, points }
}

/// Renders the frames with timestamps in `[t0, t1]`. Each frame draws from
/// its own random stream, so frames are independent of each other and of
/// the time window.
pub fn render_radar(spec: &ScenarioSpec, truth: &ScenarioTruth, t0: f64, t1: f64) -> Result<Vec<RadarFrame>> {
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!("render window [{t0}, {t1}] is empty")));
    }
    spec.validate()?;
    let inv = truth.sensor_pose.inverse();
    let frames: Vec<(usize, f64)> = spec
        .frame_times()
        .into_iter()
        .enumerate()
        .filter(|(_, t)| *t >= t0 && *t <= t1)
        .collect();
    Ok(frames
        .par_iter()
        .map(|&(k, t)| render_frame(spec, truth, &inv, k, t))
        .collect())
}
