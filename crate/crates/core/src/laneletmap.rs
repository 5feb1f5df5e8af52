//! Simplified lanelet maps: behavior labels from bound curvature, and cropping
//! of an aerial laser scan to the labeled road surface.
//!
//! The map file is JSON:
//! `{"utm_zone": "32N", "lanelets": [{"id": 1, "left": [[x, y], ...], "right": [[x, y], ...]}]}`.
//! Bounds follow the travel direction, the left bound on the driver's left.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{BehaviorLabel, LabeledCloud, LabeledPoint, PointCloud};
use crate::{Error, Result};

/// Default curvature threshold separating turns from straight lanelets, 1/m.
pub const DEFAULT_GAMMA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lanelet {
    pub id: i64,
    pub left: Vec<[f64; 2]>,
    pub right: Vec<[f64; 2]>,
    /// Derived by [`label_lanelet`]; not part of the file format.
    #[serde(skip)]
    pub label: Option<BehaviorLabel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LaneletMap {
    pub utm_zone: String,
    pub lanelets: Vec<Lanelet>,
}

impl Lanelet {
    pub fn new(id: i64, left: Vec<[f64; 2]>, right: Vec<[f64; 2]>) -> Self {
        Self {
            id,
            left,
            right,
            label: None,
        }
    }

    /// Closed outline: the left bound followed by the reversed right bound.
    pub fn polygon(&self) -> Vec<[f64; 2]> {
        self.left.iter().chain(self.right.iter().rev()).copied().collect()
    }

    /// Midpoints between corresponding bound samples; bounds of different
    /// lengths are resampled by index ratio.
    pub fn centerline(&self) -> Vec<[f64; 2]> {
        let n = self.left.len().max(self.right.len());
        (0..n)
            .map(|i| {
                let l = self.left[i * (self.left.len() - 1) / (n - 1).max(1)];
                let r = self.right[i * (self.right.len() - 1) / (n - 1).max(1)];
                [(l[0] + r[0]) / 2.0, (l[1] + r[1]) / 2.0]
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.left.len() < 2 || self.right.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "lanelet {}: bounds need at least 2 points",
                self.id
            )));
        }
        if !self.left.iter().chain(&self.right).all(|p| p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::InvalidParameter(format!("lanelet {}: non-finite coordinate", self.id)));
        }
        if !is_simple_polygon(&self.polygon()) {
            return Err(Error::DegenerateGeometry(format!(
                "lanelet {}: bounds do not enclose a simple polygon",
                self.id
            )));
        }
        Ok(())
    }
}

impl LaneletMap {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for l in &self.lanelets {
            if !seen.insert(l.id) {
                return Err(Error::InvalidParameter(format!("duplicate lanelet id {}", l.id)));
            }
            l.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map = Self::from_json(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
        map.validate()?;
        Ok(map)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("map serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Labels every lanelet in place.
    pub fn label_all(&mut self, gamma: f64) -> Result<()> {
        for l in &mut self.lanelets {
            l.label = Some(label_lanelet(l, gamma)?);
        }
        Ok(())
    }
}

/// Inverse circumradius of three points, `4·Area / (|ab|·|bc|·|ca|)`.
pub fn menger_curvature(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Result<f64> {
    let dist = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).hypot(p[1] - q[1]);
    let (ab, bc, ca) = (dist(a, b), dist(b, c), dist(c, a));
    let scale = a.iter().chain(&b).chain(&c).fold(1.0f64, |m, v| m.max(v.abs()));
    if ab.min(bc).min(ca) <= 1e-12 * scale {
        return Err(Error::DegenerateGeometry("coincident points".into()));
    }
    let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
    // 4 · (|cross| / 2)
    Ok(2.0 * cross.abs() / (ab * bc * ca))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    CounterClockwise,
    Clockwise,
    Collinear,
}

pub fn polyline_orientation(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Orientation {
    let (ux, uy) = (b[0] - a[0], b[1] - a[1]);
    let (vx, vy) = (c[0] - a[0], c[1] - a[1]);
    let cross = ux * vy - uy * vx;
    let scale = ux.hypot(uy) * vx.hypot(vy);
    if cross.abs() <= 1e-12 * scale {
        Orientation::Collinear
    } else if cross > 0.0 {
        Orientation::CounterClockwise
    } else {
        Orientation::Clockwise
    }
}

/// Behavior label from the start, middle (index `n/2`) and end points of the
/// left bound.
pub fn label_lanelet(lanelet: &Lanelet, gamma: f64) -> Result<BehaviorLabel> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let n = lanelet.left.len();
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "lanelet {}: left bound needs at least 3 points",
            lanelet.id
        )));
    }
    let (st, md, ed) = (lanelet.left[0], lanelet.left[n / 2], lanelet.left[n - 1]);
    let c = menger_curvature(st, md, ed).unwrap_or(0.0);
    if c <= gamma {
        return Ok(BehaviorLabel::Straight);
    }
    Ok(match polyline_orientation(st, md, ed) {
        Orientation::CounterClockwise => BehaviorLabel::LeftTurn,
        Orientation::Clockwise => BehaviorLabel::RightTurn,
        Orientation::Collinear => BehaviorLabel::Straight,
    })
}

fn on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    cx * cx + cy * cy <= 1e-18 * (1.0 + len2)
}

/// Even-odd ray casting; points on the boundary count as inside.
pub fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (polygon[j], polygon[i]);
        if on_segment(p, a, b) {
            return true;
        }
        if (b[1] > p[1]) != (a[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        let v = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
        if v.abs() < 1e-12 {
            0
        } else {
            v.signum() as i32
        }
    };
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(c, a, b))
        || (o2 == 0 && on_segment(d, a, b))
        || (o3 == 0 && on_segment(a, c, d))
        || (o4 == 0 && on_segment(b, c, d))
}

fn is_simple_polygon(poly: &[[f64; 2]]) -> bool {
    // Drop repeated consecutive vertices before testing.
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(poly.len());
    for &p in poly {
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    let n = pts.len();
    if n < 3 {
        return false;
    }
    let edge = |i: usize| (pts[i], pts[(i + 1) % n]);
    let bbox = |(a, b): ([f64; 2], [f64; 2])| {
        [a[0].min(b[0]), a[1].min(b[1]), a[0].max(b[0]), a[1].max(b[1])]
    };
    let boxes: Vec<[f64; 4]> = (0..n).map(|i| bbox(edge(i))).collect();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (boxes[i], boxes[j]);
            if bi[2] < bj[0] || bj[2] < bi[0] || bi[3] < bj[1] || bj[3] < bi[1] {
                continue;
            }
            let (a, b) = edge(i);
            let (c, d) = edge(j);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Keeps the ALS points inside some lanelet polygon, labeled with that
/// lanelet's behavior. Overlaps resolve to the lowest lanelet id; z is kept.
pub fn crop_als_by_lanelets(als: &PointCloud, map: &LaneletMap, gamma: f64) -> Result<LabeledCloud> {
    if map.lanelets.is_empty() {
        return Err(Error::InvalidParameter("lanelet map is empty".into()));
    }
    let mut regions = map
        .lanelets
        .iter()
        .map(|l| {
            let poly = l.polygon();
            let mut bbox = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
            for p in &poly {
                bbox = [bbox[0].min(p[0]), bbox[1].min(p[1]), bbox[2].max(p[0]), bbox[3].max(p[1])];
            }
            Ok((l.id, label_lanelet(l, gamma)?, poly, bbox))
        })
        .collect::<Result<Vec<_>>>()?;
    regions.sort_by_key(|r| r.0);

    let points: Vec<LabeledPoint> = als
        .points
        .par_iter()
        .filter_map(|p| {
            regions
                .iter()
                .find(|(_, _, poly, b)| {
                    p.x >= b[0] && p.x <= b[2] && p.y >= b[1] && p.y <= b[3] && point_in_polygon([p.x, p.y], poly)
                })
                .map(|(_, label, _, _)| LabeledPoint::new(p.x, p.y, p.z, *label))
        })
        .collect();
    Ok(points.into())
}
