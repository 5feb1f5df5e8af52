use super::tracker::BirthRegion;
use crate::geometry::{normalize_angle, Pose2};
use crate::laneletmap::LaneletMap;

/// Sensor footprint in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOfView {
    /// Sensor position and boresight heading.
    pub pose: Pose2,
    /// Full horizontal opening angle, radians.
    pub horizontal: f64,
    pub max_range: f64,
}

impl FieldOfView {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (dx, dy) = (p[0] - self.pose.x, p[1] - self.pose.y);
        dx.hypot(dy) <= self.max_range && normalize_angle(dy.atan2(dx) - self.pose.yaw).abs() <= self.horizontal / 2.0
    }
}

/// Point and heading `dist` meters along a polyline from vertex `start`.
fn advance(line: &[[f64; 2]], start: usize, dist: f64) -> ([f64; 2], f64) {
    let mut left = dist;
    let mut i = start;
    while i + 1 < line.len() {
        let (a, b) = (line[i], line[i + 1]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let heading = (b[1] - a[1]).atan2(b[0] - a[0]);
        if len >= left || i + 2 == line.len() {
            let f = if len > 0.0 { (left / len).min(1.0) } else { 0.0 };
            return ([a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])], heading);
        }
        left -= len;
        i += 1;
    }
    let h = if line.len() >= 2 {
        let (a, b) = (line[line.len() - 2], line[line.len() - 1]);
        (b[1] - a[1]).atan2(b[0] - a[0])
    } else {
        0.0
    };
    (line[line.len() - 1], h)
}

/// Places a birth region wherever a lane centerline enters the field of
/// view: at a crossing of the footprint boundary, or at the start of a
/// lanelet inside the footprint that does not continue another lanelet.
/// Regions sit `inset` meters past the entry point along the lane; regions
/// closer than `radius / 2` to an earlier one are dropped.
pub fn birth_regions_from_map(map: &LaneletMap, fov: &FieldOfView, inset: f64, radius: f64) -> Vec<BirthRegion> {
    let mut lanelets: Vec<_> = map.lanelets.iter().collect();
    lanelets.sort_by_key(|l| l.id);
    let lines: Vec<Vec<[f64; 2]>> = lanelets.iter().map(|l| l.centerline()).collect();
    let ends: Vec<[f64; 2]> = lines.iter().filter_map(|c| c.last().copied()).collect();

    let mut out: Vec<BirthRegion> = Vec::new();
    for line in &lines {
        for i in 0..line.len() {
            if !fov.contains(line[i]) {
                continue;
            }
            let entry = if i == 0 {
                !ends.iter().any(|e| (e[0] - line[0][0]).hypot(e[1] - line[0][1]) < 1.5)
            } else {
                !fov.contains(line[i - 1])
            };
            if !entry {
                continue;
            }
            let (center, heading) = advance(line, i, inset);
            if out
                .iter()
                .any(|b| (b.center[0] - center[0]).hypot(b.center[1] - center[1]) < radius / 2.0)
            {
                continue;
            }
            out.push(BirthRegion {
                center,
                radius,
                initial_heading: heading,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laneletmap::Lanelet;
    use approx::assert_abs_diff_eq;

    fn straight(id: i64, from: [f64; 2], to: [f64; 2]) -> Lanelet {
        let n = 41;
        let len = (to[0] - from[0]).hypot(to[1] - from[1]);
        let (ux, uy) = ((to[0] - from[0]) / len, (to[1] - from[1]) / len);
        let pt = |i: usize, side: f64| {
            let f = i as f64 / (n - 1) as f64;
            [from[0] + f * (to[0] - from[0]) - uy * side, from[1] + f * (to[1] - from[1]) + ux * side]
        };
        Lanelet::new(id, (0..n).map(|i| pt(i, 1.5)).collect(), (0..n).map(|i| pt(i, -1.5)).collect())
    }

    #[test]
    fn entry_where_lane_crosses_range() {
        // Sensor at the origin looking east; a lane driving west from x = 200.
        let map = LaneletMap {
            utm_zone: "32N".into(),
            lanelets: vec![straight(1, [200.0, 10.0], [0.0, 10.0])],
        };
        let fov = FieldOfView {
            pose: Pose2::identity(),
            horizontal: 120f64.to_radians(),
            max_range: 100.0,
        };
        let regions = birth_regions_from_map(&map, &fov, 6.0, 8.0);
        assert_eq!(regions.len(), 1);
        let r = regions[0];
        // First centerline sample inside range is at x = 95, then 6 m further west.
        assert_abs_diff_eq!(r.center[0], 89.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.center[1], 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(normalize_angle(r.initial_heading - std::f64::consts::PI), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn continuation_lanelets_are_not_entries() {
        let map = LaneletMap {
            utm_zone: "32N".into(),
            lanelets: vec![
                straight(1, [150.0, 10.0], [40.0, 10.0]),
                straight(2, [40.0, 10.0], [10.0, 10.0]),
                straight(3, [50.0, -20.0], [50.0, -5.0]),
            ],
        };
        let fov = FieldOfView {
            pose: Pose2::identity(),
            horizontal: 120f64.to_radians(),
            max_range: 100.0,
        };
        let regions = birth_regions_from_map(&map, &fov, 6.0, 8.0);
        assert_eq!(regions.len(), 2);
        assert_abs_diff_eq!(regions[1].center[1], -14.0, epsilon = 1e-9);
    }
}
