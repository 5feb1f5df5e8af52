//! Coarse localization: accumulate radar frames, keep moving returns, and
//! register them to the road cloud with point-to-point ICP.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::io::{column_map, csv_error, csv_reader, csv_writer, finish, parse_f64, write_header};
use crate::geometry::{
    align_rigid_3d, dbscan_filter, voxel_downsample, GridIndex, PointCloud, RadarPoint, Transform3,
};
use crate::{Error, Result};

/// Radar returns sharing one timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarFrame {
    pub timestamp: f64,
    pub points: PointCloud,
}

/// Reads a recording with header `timestamp,x,y,z,range_rate`. Consecutive
/// rows with equal timestamps form one frame; timestamps must not decrease.
pub fn read_recording(path: impl AsRef<Path>) -> Result<Vec<RadarFrame>> {
    let path = path.as_ref();
    let mut rdr = csv_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let [ct, cx, cy, cz, crr] = column_map(path, &headers, ["timestamp", "x", "y", "z", "range_rate"])?;
    let mut frames: Vec<RadarFrame> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let t = parse_f64(path, &record, ct, "timestamp")?;
        let p = RadarPoint::new(
            parse_f64(path, &record, cx, "x")?,
            parse_f64(path, &record, cy, "y")?,
            parse_f64(path, &record, cz, "z")?,
            parse_f64(path, &record, crr, "range_rate")?,
        );
        match frames.last_mut() {
            Some(f) if f.timestamp == t => f.points.push(p),
            Some(f) if f.timestamp > t => {
                let line = record.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::parse(path, line, format!("timestamp {t} is earlier than {}", f.timestamp)));
            }
            _ => frames.push(RadarFrame {
                timestamp: t,
                points: vec![p].into(),
            }),
        }
    }
    Ok(frames)
}

pub fn write_recording(path: impl AsRef<Path>, frames: &[RadarFrame]) -> Result<()> {
    let path = path.as_ref();
    let mut wtr = csv_writer(path)?;
    write_header(&mut wtr, path, &["timestamp", "x", "y", "z", "range_rate"])?;
    for f in frames {
        for p in &f.points {
            wtr.serialize((f.timestamp, p.x, p.y, p.z, p.range_rate))
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(wtr, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub max_correspondence: f64,
    pub max_iterations: usize,
    pub rmse_epsilon: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_correspondence: 50.0,
            max_iterations: 100,
            rmse_epsilon: 1e-4,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_correspondence > 0.0 && self.max_iterations > 0 && self.rmse_epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("ICP parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Why an ICP loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergedBy {
    IterationCap,
    RmseDelta,
    /// The next iterate had a higher RMSE; the previous one is returned.
    RmseIncrease,
}

/// Outcome of the shared ICP driver.
pub(crate) struct Iterated<T, M> {
    pub transform: T,
    pub matches: M,
    pub solves: usize,
    pub converged_by: ConvergedBy,
    pub trace: Vec<f64>,
}

/// Generic ICP loop. `eval` matches under a transform and returns the match
/// set with its RMSE (`None` when nothing matches); `solve` produces the next
/// transform. An iterate whose RMSE rises is discarded, so the returned trace
/// is non-increasing.
pub(crate) fn iterate_icp<T: Copy, M>(
    init: T,
    params: &IcpParams,
    eval: impl Fn(&T) -> Option<(M, f64)>,
    solve: impl Fn(&M, &T) -> Result<T>,
) -> Result<Iterated<T, M>> {
    let (mut matches, rmse) = eval(&init).ok_or(Error::NoOverlap { fitness: 0.0 })?;
    let mut t = init;
    let mut trace = vec![rmse];
    let mut solves = 0;
    let converged_by = loop {
        if solves >= params.max_iterations {
            break ConvergedBy::IterationCap;
        }
        let next_t = solve(&matches, &t)?;
        let Some((next, next_rmse)) = eval(&next_t) else {
            break ConvergedBy::RmseIncrease;
        };
        let prev = *trace.last().unwrap();
        let delta = next_rmse - prev;
        if delta > 0.0 {
            break if delta < params.rmse_epsilon {
                ConvergedBy::RmseDelta
            } else {
                ConvergedBy::RmseIncrease
            };
        }
        solves += 1;
        t = next_t;
        matches = next;
        trace.push(next_rmse);
        if -delta < params.rmse_epsilon {
            break ConvergedBy::RmseDelta;
        }
    };
    Ok(Iterated {
        transform: t,
        matches,
        solves,
        converged_by,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: Transform3,
    /// Fraction of source points with a correspondence at `transform`.
    pub fitness: f64,
    /// RMSE over matched pairs at `transform`.
    pub rmse: f64,
    /// Number of alignment solves that produced `transform`.
    pub iterations: usize,
    pub converged_by: ConvergedBy,
    /// RMSE of every returned-or-earlier iterate, non-increasing.
    pub rmse_trace: Vec<f64>,
}

/// Concatenates the points with `|range_rate| >= lambda` over all frames.
pub fn extract_dynamic(frames: &[RadarFrame], lambda: f64) -> PointCloud {
    frames
        .iter()
        .flat_map(|f| f.points.iter())
        .filter(|p| p.range_rate.abs() >= lambda)
        .copied()
        .collect()
}

struct Matches {
    source: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
    fitness: f64,
    rmse: f64,
}

fn match_points(source: &[[f64; 3]], index: &GridIndex, t: &Transform3, max_dist: f64) -> Matches {
    let found: Vec<Option<([f64; 3], [f64; 3], f64)>> = source
        .par_iter()
        .map(|p| {
            let q = t.apply(*p);
            index.nearest(q, max_dist).map(|(i, d)| (q, index.points()[i], d))
        })
        .collect();
    let mut m = Matches {
        source: Vec::new(),
        target: Vec::new(),
        fitness: 0.0,
        rmse: 0.0,
    };
    let mut sum2 = 0.0;
    for (q, r, d) in found.into_iter().flatten() {
        m.source.push(q);
        m.target.push(r);
        sum2 += d * d;
    }
    if !m.source.is_empty() {
        m.fitness = m.source.len() as f64 / source.len() as f64;
        m.rmse = (sum2 / m.source.len() as f64).sqrt();
    }
    m
}

/// Point-to-point ICP. Each iteration matches every transformed source point
/// to its nearest target point within `max_correspondence` and solves the
/// rigid alignment of the matched pairs.
pub fn icp_point2point(
    source: &PointCloud,
    target: &PointCloud,
    init: &Transform3,
    params: &IcpParams,
) -> Result<IcpResult> {
    params.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::NoOverlap { fitness: 0.0 });
    }
    let index = GridIndex::with_auto_cell(target.positions(), params.max_correspondence);
    icp_with_index(&source.positions(), &index, init, params)
}

fn icp_with_index(source: &[[f64; 3]], index: &GridIndex, init: &Transform3, params: &IcpParams) -> Result<IcpResult> {
    let out = iterate_icp(
        *init,
        params,
        |t| {
            let m = match_points(source, index, t, params.max_correspondence);
            let rmse = m.rmse;
            (!m.source.is_empty()).then_some((m, rmse))
        },
        |m, t| Ok(align_rigid_3d(&m.source, &m.target)?.compose(t)),
    )?;
    Ok(IcpResult {
        transform: out.transform,
        fitness: out.matches.fitness,
        rmse: out.matches.rmse,
        iterations: out.solves,
        converged_by: out.converged_by,
        rmse_trace: out.trace,
    })
}

/// Axis-aligned rectangle `[x_min, y_min, x_max, y_max]` in the target frame.
pub type TrimRect = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseParams {
    /// Range-rate magnitude threshold, m/s.
    pub lambda: f64,
    /// Voxel size for the dynamic cloud, meters.
    pub voxel: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// Keeps only road points inside this rectangle.
    pub trim: Option<TrimRect>,
    /// ICP settings of the first stage; later stages halve the range.
    pub icp: IcpParams,
    pub stages: usize,
    /// Range used by the last stage, meters.
    pub min_correspondence: f64,
}

impl Default for CoarseParams {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            voxel: 0.5,
            dbscan_eps: 2.0,
            dbscan_min_pts: 5,
            trim: None,
            icp: IcpParams::default(),
            stages: 4,
            min_correspondence: 5.0,
        }
    }
}

impl CoarseParams {
    /// Correspondence range of every stage: halving from the initial range,
    /// the last stage at `min_correspondence`.
    pub fn stage_ranges(&self) -> Vec<f64> {
        let start = self.icp.max_correspondence;
        (0..self.stages)
            .map(|k| {
                if k + 1 == self.stages {
                    self.min_correspondence.min(start)
                } else {
                    (start / f64::powi(2.0, k as i32)).max(self.min_correspondence)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseResult {
    pub transform: Transform3,
    pub dynamic_points: usize,
    pub filtered_points: usize,
    pub target_points: usize,
    /// One entry per ICP stage.
    pub stages: Vec<IcpResult>,
}

/// Dynamic-point extraction, voxel downsampling, DBSCAN cleanup, optional
/// trimming of the road cloud, then multi-range ICP chained from `init`.
pub fn coarse_localize(
    frames: &[RadarFrame],
    road_cloud: &PointCloud,
    init: &Transform3,
    params: &CoarseParams,
) -> Result<CoarseResult> {
    params.icp.validate()?;
    if params.stages == 0 || !(params.min_correspondence > 0.0) {
        return Err(Error::InvalidParameter("coarse ICP needs at least one stage and a positive range".into()));
    }
    if !(params.lambda >= 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be non-negative, got {}", params.lambda)));
    }
    let dynamic = extract_dynamic(frames, params.lambda);
    if dynamic.is_empty() {
        return Err(Error::NoOverlap { fitness: 0.0 });
    }
    let down = voxel_downsample(&dynamic, params.voxel)?;
    let source = dbscan_filter(&down, params.dbscan_eps, params.dbscan_min_pts)?;
    if source.is_empty() {
        return Err(Error::NoOverlap { fitness: 0.0 });
    }
    let target: Vec<[f64; 3]> = road_cloud
        .iter()
        .filter(|p| match params.trim {
            Some([x0, y0, x1, y1]) => p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1,
            None => true,
        })
        .map(RadarPoint::position)
        .collect();
    if target.is_empty() {
        return Err(Error::NoOverlap { fitness: 0.0 });
    }
    let target_points = target.len();
    let src = source.positions();
    let index = GridIndex::with_auto_cell(target, params.icp.max_correspondence);

    let mut t = *init;
    let mut stages = Vec::with_capacity(params.stages);
    for range in params.stage_ranges() {
        let stage_params = IcpParams {
            max_correspondence: range,
            ..params.icp
        };
        let r = icp_with_index(&src, &index, &t, &stage_params)?;
        t = r.transform;
        stages.push(r);
    }
    Ok(CoarseResult {
        transform: t,
        dynamic_points: dynamic.len(),
        filtered_points: source.len(),
        target_points,
        stages,
    })
}

/// Maps the cloud by `t_coarse` and drops the height.
pub fn flatten_to_plane(cloud: &PointCloud, t_coarse: &Transform3) -> PointCloud {
    cloud
        .iter()
        .map(|p| {
            let [x, y, _] = t_coarse.apply(p.position());
            RadarPoint::new(x, y, 0.0, p.range_rate)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rr(v: f64) -> RadarPoint {
        RadarPoint::new(v, 0.0, 0.0, v)
    }

    /// Irregular 3D blob so that the alignment is well conditioned.
    fn blob(n: usize, seed: u64) -> PointCloud {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                RadarPoint::new(
                    rng.random_range(-20.0..20.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-2.0..2.0),
                    0.0,
                )
            })
            .collect()
    }

    #[test]
    fn extract_dynamic_examples() {
        let frames = vec![
            RadarFrame {
                timestamp: 0.0,
                points: vec![rr(-3.0), rr(-0.1)].into(),
            },
            RadarFrame {
                timestamp: 0.1,
                points: vec![rr(0.2), rr(4.0)].into(),
            },
        ];
        let out = extract_dynamic(&frames, 1.0);
        assert_eq!(out.points, vec![rr(-3.0), rr(4.0)]);
        assert_eq!(extract_dynamic(&frames, 0.0).len(), 4);
        let still = vec![RadarFrame {
            timestamp: 0.0,
            points: vec![RadarPoint::new(1.0, 2.0, 3.0, 0.0)].into(),
        }];
        assert!(extract_dynamic(&still, 0.5).is_empty());
        // Idempotent.
        let again = extract_dynamic(
            &[RadarFrame {
                timestamp: 0.0,
                points: out.clone(),
            }],
            1.0,
        );
        assert_eq!(again, out);
    }

    #[test]
    fn icp_self_registration_is_identity() {
        let c = blob(300, 1);
        let r = icp_point2point(&c, &c, &Transform3::identity(), &IcpParams::default()).unwrap();
        assert_eq!(r.fitness, 1.0);
        assert!(r.rmse < 1e-9);
        assert!((r.transform.rotation - nalgebra::Matrix3::identity()).amax() < 1e-9);
        assert!(r.transform.translation.amax() < 1e-9);
    }

    #[test]
    fn icp_recovers_translation() {
        let source = blob(400, 2);
        let shift = Transform3::from_translation(2.0, 0.0, 0.0);
        let target: PointCloud = source
            .iter()
            .map(|p| {
                let [x, y, z] = shift.apply(p.position());
                RadarPoint::new(x, y, z, 0.0)
            })
            .collect();
        let r = icp_point2point(&source, &target, &Transform3::identity(), &IcpParams::default()).unwrap();
        assert_abs_diff_eq!(r.transform.translation.x, 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.transform.translation.y, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.transform.translation.z, 0.0, epsilon = 1e-6);
        assert!(r.rmse_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn icp_far_apart_is_no_overlap() {
        let source = blob(50, 3);
        let params = IcpParams {
            max_correspondence: 5.0,
            ..Default::default()
        };
        let far = Transform3::from_translation(50.0 + 10.0 * params.max_correspondence, 0.0, 0.0);
        let err = icp_point2point(&source, &source, &far, &params).unwrap_err();
        assert!(matches!(err, Error::NoOverlap { fitness } if fitness == 0.0));
    }

    #[test]
    fn icp_equivariant_under_target_motion() {
        let source = blob(300, 4);
        let truth = Transform3::from_euler([1.0, -0.5, 0.2], 0.01, -0.02, 0.1);
        let target: PointCloud = source
            .iter()
            .map(|p| {
                let [x, y, z] = truth.apply(p.position());
                RadarPoint::new(x, y, z, 0.0)
            })
            .collect();
        let params = IcpParams::default();
        let base = icp_point2point(&source, &target, &Transform3::identity(), &params).unwrap();

        let g = Transform3::from_euler([30.0, 12.0, -1.0], 0.0, 0.0, 0.7);
        let moved: PointCloud = target
            .iter()
            .map(|p| {
                let [x, y, z] = g.apply(p.position());
                RadarPoint::new(x, y, z, 0.0)
            })
            .collect();
        let r = icp_point2point(&source, &moved, &g, &params).unwrap();
        let expected = g.compose(&base.transform);
        assert!((r.transform.rotation - expected.rotation).amax() < 1e-6);
        assert!((r.transform.translation - expected.translation).amax() < 1e-6);
    }

    #[test]
    fn stage_ranges_halve_to_floor() {
        assert_eq!(CoarseParams::default().stage_ranges(), vec![50.0, 25.0, 12.5, 5.0]);
        let one = CoarseParams {
            stages: 1,
            ..Default::default()
        };
        assert_eq!(one.stage_ranges(), vec![5.0]);
    }

    #[test]
    fn coarse_without_moving_points_fails() {
        let frames = vec![RadarFrame {
            timestamp: 0.0,
            points: blob(20, 5),
        }];
        let err = coarse_localize(&frames, &blob(20, 6), &Transform3::identity(), &CoarseParams::default());
        assert!(matches!(err, Err(Error::NoOverlap { .. })));
    }

    #[test]
    fn flatten_examples() {
        let c: PointCloud = vec![RadarPoint::new(1.0, 2.0, 3.0, 0.5)].into();
        let f = flatten_to_plane(&c, &Transform3::identity());
        assert_eq!(f.points, vec![RadarPoint::new(1.0, 2.0, 0.0, 0.5)]);
        assert!(flatten_to_plane(&PointCloud::new(), &Transform3::identity()).is_empty());

        // Point on a plane tilted 10° about x; undoing the tilt lands it at z ≈ 0.
        let tilt = Transform3::from_euler([0.0, 0.0, 0.0], 10f64.to_radians(), 0.0, 0.0);
        let p = tilt.apply([3.0, 4.0, 0.0]);
        let back = tilt.inverse();
        assert!(back.apply(p)[2].abs() < 1e-12);
        let f = flatten_to_plane(&vec![RadarPoint::new(p[0], p[1], p[2], 0.0)].into(), &back);
        assert_eq!(f.points[0].z, 0.0);
        assert_abs_diff_eq!(f.points[0].x, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.points[0].y, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn recording_round_trip_and_order_check() {
        let frames = vec![
            RadarFrame {
                timestamp: 0.0,
                points: blob(3, 7),
            },
            RadarFrame {
                timestamp: 0.05,
                points: blob(2, 8),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("radar.csv");
        write_recording(&path, &frames).unwrap();
        assert_eq!(read_recording(&path).unwrap(), frames);

        std::fs::write(&path, "timestamp,x,y,z,range_rate\n1,0,0,0,0\n0.5,0,0,0,0\n").unwrap();
        match read_recording(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn rmse_trace_non_increasing(seed in 0u64..1000, dx in -3.0..3.0f64, dy in -3.0..3.0f64, yaw in -0.2..0.2f64) {
            let source = blob(200, seed);
            let truth = Transform3::from_euler([dx, dy, 0.0], 0.0, 0.0, yaw);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let target: PointCloud = source
                .iter()
                .map(|p| {
                    let [x, y, z] = truth.apply(p.position());
                    RadarPoint::new(x + rng.random_range(-0.1..0.1), y, z, 0.0)
                })
                .collect();
            let params = IcpParams { max_correspondence: 5.0, ..Default::default() };
            let r = icp_point2point(&source, &target, &Transform3::identity(), &params).unwrap();
            prop_assert!(r.rmse_trace.windows(2).all(|w| w[1] <= w[0]));
            prop_assert!(r.fitness > 0.0 && r.fitness <= 1.0);
            prop_assert_eq!(*r.rmse_trace.last().unwrap(), r.rmse);
        }
    }
}
