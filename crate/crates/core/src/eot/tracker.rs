use nalgebra::{DMatrix, DVector, Matrix6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::contour::{generate_candidates, ContourModel, ContourState};
use super::ctra::{ctra_step, KinematicState, PHI};
use super::gp::GpParams;
use super::hungarian::associate_hungarian;
use super::ukf::{deviations, robust_cholesky, sigma_moments, sigma_points, sigma_weights, symmetrize, UkfParams};
use crate::geometry::{normalize_angle, RadarPoint};
use crate::{Error, Result};

/// Process and measurement noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Variance rates for `(x, y, v, a, φ, φ̇)`, per second.
    pub process: [f64; 6],
    /// Standard deviation of a radar return, meters.
    pub measurement_std: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            process: [0.1f64.powi(2), 0.1f64.powi(2), 0.5f64.powi(2), 0.5f64.powi(2), 0.05f64.powi(2), 0.05f64.powi(2)],
            measurement_std: 0.3,
        }
    }
}

/// A spot where vehicles enter the field of view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BirthRegion {
    pub center: [f64; 2],
    pub radius: f64,
    pub initial_heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub gp: GpParams,
    pub ukf: UkfParams,
    pub noise: NoiseConfig,
    /// Points farther than this from every predicted center are unclaimed.
    pub gate: f64,
    /// Points farther than this outside every predicted contour are
    /// unclaimed; `None` gates on the center distance alone.
    pub contour_gate: Option<f64>,
    /// Maximum measurement-to-candidate distance kept after assignment.
    pub assoc_gate: f64,
    pub confirm_frames: usize,
    pub terminate_frames: usize,
    /// Candidates per basis angle.
    pub candidate_factor: usize,
    /// Measurements per track and frame fed to the filter (evenly thinned).
    pub max_measurements: usize,
    pub birth_cluster_eps: f64,
    pub birth_min_points: usize,
    /// Shift of a new track's center away from the sensor, meters.
    pub birth_offset: f64,
    /// Initial speed when the range rate says little about it.
    pub default_speed: f64,
    pub max_speed: f64,
    /// Nominal frame spacing, used to count frames missing from the input.
    pub frame_period: f64,
    /// Initial standard deviations of `(x, y, v, a, φ, φ̇)`.
    pub initial_std: [f64; 6],
    /// Length and width of the rectangle that seeds a new track's radii;
    /// `None` seeds every radius with the GP mean.
    pub birth_extent: Option<[f64; 2]>,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            gp: GpParams::default(),
            ukf: UkfParams::default(),
            noise: NoiseConfig::default(),
            gate: 10.0,
            contour_gate: Some(1.5),
            assoc_gate: 5.0,
            confirm_frames: 5,
            terminate_frames: 10,
            candidate_factor: 3,
            max_measurements: 24,
            birth_cluster_eps: 2.0,
            birth_min_points: 3,
            birth_offset: 1.0,
            default_speed: 8.0,
            max_speed: 40.0,
            frame_period: 0.05,
            initial_std: [1.0, 1.0, 3.0, 1.0, 0.15, 0.1],
            birth_extent: Some([4.5, 1.8]),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        self.gp.validate()?;
        let positive = [self.gate, self.assoc_gate, self.frame_period, self.noise.measurement_std, self.birth_cluster_eps];
        if positive.iter().any(|v| !(*v > 0.0))
            || self.confirm_frames == 0
            || self.terminate_frames == 0
            || self.candidate_factor == 0
            || self.max_measurements == 0
            || self.noise.process.iter().any(|q| !(*q >= 0.0))
            || self.initial_std.iter().any(|s| !(*s > 0.0))
            || self.contour_gate.is_some_and(|g| !(g > 0.0))
            || self.birth_extent.is_some_and(|[l, w]| !(l > 0.0 && w > 0.0))
        {
            return Err(Error::InvalidParameter(format!("invalid tracker configuration: {self:?}")));
        }
        Ok(())
    }

    pub fn contour_model(&self) -> Result<ContourModel> {
        ContourModel::new(&self.gp, self.candidate_factor * self.gp.n_theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Terminated,
}

/// One frame of a track: filtered state and the points gated to it.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryEntry {
    pub timestamp: f64,
    pub state: [f64; 6],
    pub radii: Vec<f64>,
    pub status: TrackStatus,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackHistory {
    pub id: u64,
    pub entries: Vec<HistoryEntry>,
}

impl TrackHistory {
    pub fn was_confirmed(&self) -> bool {
        self.entries.iter().any(|e| e.status == TrackStatus::Confirmed)
    }
}

/// Joint kinematic and contour estimate with lifecycle bookkeeping. The
/// state vector is `[x, y, v, a, φ, φ̇, f(θ_1), …, f(θ_n)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub status: TrackStatus,
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub history: TrackHistory,
    /// Consecutive frames with measurements.
    pub hits: usize,
    /// Consecutive frames without measurements.
    pub misses: usize,
}

impl Track {
    pub fn new(id: u64, kinematic: &KinematicState, contour: &ContourState) -> Self {
        let n = contour.radii.len();
        let mut mean = DVector::zeros(6 + n);
        mean.rows_mut(0, 6).copy_from_slice(&kinematic.vector());
        mean.rows_mut(6, n).copy_from(&contour.radii);
        let mut covariance = DMatrix::zeros(6 + n, 6 + n);
        covariance.view_mut((0, 0), (6, 6)).copy_from(&kinematic.covariance);
        covariance.view_mut((6, 6), (n, n)).copy_from(&contour.covariance);
        Self {
            id,
            status: TrackStatus::Tentative,
            mean,
            covariance,
            history: TrackHistory { id, entries: Vec::new() },
            hits: 0,
            misses: 0,
        }
    }

    pub fn kinematic(&self) -> KinematicState {
        let s: [f64; 6] = std::array::from_fn(|i| self.mean[i]);
        KinematicState::new(s, Matrix6::from_fn(|i, j| self.covariance[(i, j)]))
    }

    pub fn contour(&self, basis_angles: &[f64]) -> ContourState {
        let n = self.mean.len() - 6;
        ContourState {
            radii: self.mean.rows(6, n).into_owned(),
            covariance: self.covariance.view((6, 6), (n, n)).into_owned(),
            basis_angles: basis_angles.to_vec(),
        }
    }

    pub fn radii(&self) -> DVector<f64> {
        self.mean.rows(6, self.mean.len() - 6).into_owned()
    }

    pub fn center(&self) -> [f64; 2] {
        [self.mean[0], self.mean[1]]
    }

    fn record(&mut self, timestamp: f64, points: Vec<[f64; 2]>) {
        self.history.entries.push(HistoryEntry {
            timestamp,
            state: std::array::from_fn(|i| self.mean[i]),
            radii: self.radii().iter().copied().collect(),
            status: self.status,
            points,
        });
    }
}

/// Joint prediction: CTRA on the kinematics, forgetting on the contour.
/// Runs with the center shifted to the origin for conditioning.
pub(crate) fn predict_track(track: &Track, dt: f64, model: &ContourModel, config: &TrackerConfig) -> Track {
    let mut out = track.clone();
    if dt <= 0.0 {
        return out;
    }
    let p = &config.gp;
    let d = (-p.tau * dt).exp();
    let n = out.mean.len() - 6;
    let c0 = track.center();
    let mut x = track.mean.clone();
    x[0] -= c0[0];
    x[1] -= c0[1];
    let w = sigma_weights(x.len(), &config.ukf);
    let ys: Vec<DVector<f64>> = sigma_points(&x, &track.covariance, &w)
        .into_iter()
        .map(|mut s| {
            let k = ctra_step(std::array::from_fn(|i| s[i]), dt);
            s.rows_mut(0, 6).copy_from_slice(&k);
            for i in 6..6 + n {
                s[i] = p.mean_radius + d * (s[i] - p.mean_radius);
            }
            s
        })
        .collect();
    let (mut mean, mut cov) = sigma_moments(&ys, &w, &[PHI]);
    for (i, q) in config.noise.process.iter().enumerate() {
        cov[(i, i)] += q * dt;
    }
    let mut block = cov.view_mut((6, 6), (n, n));
    block += &model.gram * (1.0 - d * d);
    symmetrize(&mut cov);
    mean[0] += c0[0];
    mean[1] += c0[1];
    out.mean = mean;
    out.covariance = cov;
    out
}

/// Distance from the center of an `l × w` rectangle to its boundary along
/// body angle `theta`.
pub fn rectangle_radius(l: f64, w: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let along = if c.abs() > 1e-12 { l / 2.0 / c.abs() } else { f64::INFINITY };
    let across = if s.abs() > 1e-12 { w / 2.0 / s.abs() } else { f64::INFINITY };
    along.min(across)
}

/// Evenly thins `points` to at most `max` entries.
fn thin(points: &[[f64; 2]], max: usize) -> Vec<[f64; 2]> {
    if points.len() <= max {
        return points.to_vec();
    }
    (0..max).map(|k| points[k * points.len() / max]).collect()
}

/// Radial residuals `|z − c| − f(θ)` of the measurements for state `s`,
/// with θ the body-frame angle of each measurement seen from the center.
/// The observed value of every residual is zero.
fn radial_residuals(s: &DVector<f64>, z: &[[f64; 2]], model: &ContourModel) -> DVector<f64> {
    let n = s.len() - 6;
    let r = s.rows(6, n).into_owned();
    DVector::from_iterator(
        z.len(),
        z.iter().map(|p| {
            let (dx, dy) = (p[0] - s[0], p[1] - s[1]);
            dx.hypot(dy) - model.radius_at_angle(dy.atan2(dx) - s[PHI], &r)
        }),
    )
}

/// Measurement update with the visible-candidate association. Returns the
/// track unchanged when nothing associates.
pub(crate) fn update_track(
    track: &Track,
    measurements: &[[f64; 2]],
    sensor_xy: [f64; 2],
    model: &ContourModel,
    config: &TrackerConfig,
) -> Result<Track> {
    let mut out = track.clone();
    if measurements.is_empty() {
        return Ok(out);
    }
    let kin = track.kinematic();
    let radii = track.radii();
    let visible: Vec<_> = generate_candidates(&kin, &radii, model, sensor_xy)
        .into_iter()
        .filter(|c| c.visible)
        .collect();
    if visible.is_empty() {
        return Ok(out);
    }
    let meas = thin(measurements, config.max_measurements);
    let positions: Vec<[f64; 2]> = visible.iter().map(|c| c.position).collect();
    let pairs = associate_hungarian(&meas, &positions, config.assoc_gate);
    if pairs.is_empty() {
        return Ok(out);
    }

    let c0 = track.center();
    let n = radii.len();
    let m = pairs.len();
    let sigma2 = config.noise.measurement_std.powi(2);
    let mut z = Vec::with_capacity(m);
    let mut noise = DVector::zeros(m);
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let p = [meas[i][0] - c0[0], meas[i][1] - c0[1]];
        // A position error maps onto the radial residual through the local
        // contour slope, which grows toward corners.
        let (f, df) = model.radius_and_slope(p[1].atan2(p[0]) - track.mean[PHI], &radii);
        let g = df / f.max(0.1);
        z.push(p);
        noise[k] = sigma2 * (1.0 + g * g) + model.residual_variance[visible[j].index];
    }
    let h = |s: &DVector<f64>| radial_residuals(s, &z, model);

    let mut x = track.mean.clone();
    x[0] -= c0[0];
    x[1] -= c0[1];
    let w = sigma_weights(x.len(), &config.ukf);
    let sigmas = sigma_points(&x, &track.covariance, &w);
    let zs: Vec<DVector<f64>> = sigmas.iter().map(h).collect();
    let (z_hat, mut s) = sigma_moments(&zs, &w, &[]);
    for i in 0..m {
        s[(i, i)] += noise[i];
    }
    let dx = deviations(&sigmas, &x, &[PHI]);
    let z_shift = &z_hat - &zs[0];
    let mut pxz = DMatrix::zeros(x.len(), m);
    for ((d, zi), wc) in dx.iter().zip(&zs).zip(&w.cov) {
        let e = zi - &zs[0] - &z_shift;
        pxz.ger(*wc, d, &e, 1.0);
    }
    symmetrize(&mut s);
    let l = robust_cholesky(&s);
    let gain_t = l
        .solve_lower_triangular(&pxz.transpose())
        .and_then(|y| l.transpose().solve_upper_triangular(&y))
        .ok_or_else(|| Error::SingularMatrix("innovation covariance".into()))?;
    let gain = gain_t.transpose();
    let innovation = -z_hat;
    let mut mean = &x + &gain * innovation;
    let mut cov = &track.covariance - &gain * &s * gain.transpose();
    symmetrize(&mut cov);
    mean[PHI] = normalize_angle(mean[PHI]);
    mean[0] += c0[0];
    mean[1] += c0[1];
    for i in 6..6 + n {
        mean[i] = mean[i].max(0.1);
    }
    out.mean = mean;
    out.covariance = cov;
    Ok(out)
}

/// One predict-update cycle for a single track.
pub fn ukf_update(
    track: &Track,
    measurements: &[[f64; 2]],
    sensor_xy: [f64; 2],
    dt: f64,
    config: &TrackerConfig,
) -> Result<Track> {
    config.validate()?;
    let model = config.contour_model()?;
    let predicted = predict_track(track, dt, &model, config);
    update_track(&predicted, measurements, sensor_xy, &model, config)
}

/// Multi-object tracker over a sequence of flattened frames.
#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: TrackerConfig,
    pub sensor_xy: [f64; 2],
    pub birth_regions: Vec<BirthRegion>,
    model: ContourModel,
    tracks: Vec<Track>,
    next_id: u64,
    last_time: Option<f64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig, sensor_xy: [f64; 2], birth_regions: Vec<BirthRegion>) -> Result<Self> {
        config.validate()?;
        if birth_regions.iter().any(|b| !(b.radius > 0.0)) {
            return Err(Error::InvalidParameter("birth region radius must be positive".into()));
        }
        let model = config.contour_model()?;
        Ok(Self {
            config,
            sensor_xy,
            birth_regions,
            model,
            tracks: Vec::new(),
            next_id: 1,
            last_time: None,
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn into_tracks(self) -> Vec<Track> {
        self.tracks
    }

    pub fn model(&self) -> &ContourModel {
        &self.model
    }

    /// Processes one frame: predict, gate, update, lifecycle, birth.
    pub fn step(&mut self, timestamp: f64, points: &[RadarPoint]) -> Result<()> {
        let dt = match self.last_time {
            Some(last) if timestamp <= last => {
                return Err(Error::InvalidParameter(format!(
                    "frame time {timestamp} does not follow {last}"
                )));
            }
            Some(last) => timestamp - last,
            None => 0.0,
        };
        self.last_time = Some(timestamp);
        let skipped = if dt > 1.5 * self.config.frame_period {
            (dt / self.config.frame_period).round() as usize - 1
        } else {
            0
        };

        let alive: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| self.tracks[i].status != TrackStatus::Terminated)
            .collect();
        let (model, config) = (&self.model, &self.config);
        let predicted: Vec<Track> = alive
            .par_iter()
            .map(|&i| predict_track(&self.tracks[i], dt, model, config))
            .collect();

        // Gate every point to the track whose predicted contour it lies
        // least outside of, or to the nearest center without a contour gate.
        let radii: Vec<DVector<f64>> = predicted.iter().map(Track::radii).collect();
        let mut claimed: Vec<Vec<usize>> = vec![Vec::new(); predicted.len()];
        let mut unclaimed = Vec::new();
        for (pi, p) in points.iter().enumerate() {
            let mut best: Option<(f64, usize)> = None;
            for (k, t) in predicted.iter().enumerate() {
                let c = t.center();
                let (dx, dy) = (p.x - c[0], p.y - c[1]);
                let d = dx.hypot(dy);
                if d > config.gate {
                    continue;
                }
                let score = match config.contour_gate {
                    Some(g) => {
                        let excess = d - model.radius_at_angle(dy.atan2(dx) - t.mean[PHI], &radii[k]);
                        if excess > g {
                            continue;
                        }
                        excess
                    }
                    None => d,
                };
                if best.is_none_or(|(bs, _)| score < bs) {
                    best = Some((score, k));
                }
            }
            match best {
                Some((_, k)) => claimed[k].push(pi),
                None => unclaimed.push(pi),
            }
        }

        let sensor = self.sensor_xy;
        let updated: Vec<Result<Track>> = predicted
            .par_iter()
            .zip(claimed.par_iter())
            .map(|(t, idx)| {
                let z: Vec<[f64; 2]> = idx.iter().map(|&i| [points[i].x, points[i].y]).collect();
                update_track(t, &z, sensor, model, config)
            })
            .collect();

        for ((slot, result), idx) in alive.iter().zip(updated).zip(&claimed) {
            let mut t = result?;
            if idx.is_empty() {
                t.hits = 0;
                t.misses += 1 + skipped;
                if t.misses >= config.terminate_frames {
                    t.status = TrackStatus::Terminated;
                }
            } else {
                t.hits += 1;
                t.misses = 0;
                if t.status == TrackStatus::Tentative && t.hits >= config.confirm_frames {
                    t.status = TrackStatus::Confirmed;
                }
            }
            if t.status != TrackStatus::Terminated {
                t.record(timestamp, idx.iter().map(|&i| [points[i].x, points[i].y]).collect());
            }
            self.tracks[*slot] = t;
        }

        self.spawn(timestamp, points, &unclaimed);
        Ok(())
    }

    fn spawn(&mut self, timestamp: f64, points: &[RadarPoint], unclaimed: &[usize]) {
        let region_of = |p: &RadarPoint| {
            self.birth_regions
                .iter()
                .position(|b| (p.x - b.center[0]).hypot(p.y - b.center[1]) <= b.radius)
        };
        let candidates: Vec<(usize, usize)> = unclaimed
            .iter()
            .filter_map(|&i| region_of(&points[i]).map(|r| (i, r)))
            .collect();
        if candidates.is_empty() {
            return;
        }
        // Single-linkage clusters, in order of their first point.
        let eps = self.config.birth_cluster_eps;
        let mut cluster = vec![usize::MAX; candidates.len()];
        let mut n_clusters = 0;
        for seed in 0..candidates.len() {
            if cluster[seed] != usize::MAX {
                continue;
            }
            cluster[seed] = n_clusters;
            let mut stack = vec![seed];
            while let Some(a) = stack.pop() {
                let pa = &points[candidates[a].0];
                for b in 0..candidates.len() {
                    if cluster[b] == usize::MAX {
                        let pb = &points[candidates[b].0];
                        if (pa.x - pb.x).hypot(pa.y - pb.y) <= eps {
                            cluster[b] = n_clusters;
                            stack.push(b);
                        }
                    }
                }
            }
            n_clusters += 1;
        }
        for c in 0..n_clusters {
            let members: Vec<usize> = (0..candidates.len()).filter(|&k| cluster[k] == c).collect();
            if members.len() < self.config.birth_min_points {
                continue;
            }
            let region = self.birth_regions[candidates[members[0]].1];
            let pts: Vec<&RadarPoint> = members.iter().map(|&k| &points[candidates[k].0]).collect();
            if self.near_live_track(&pts) {
                continue;
            }
            let track = self.birth_track(&region, &pts);
            let mut track = track;
            track.hits = 1;
            track.record(timestamp, pts.iter().map(|p| [p.x, p.y]).collect());
            self.tracks.push(track);
        }
    }

    /// Whether a cluster hugs the contour of a live track, in which case it
    /// is a part of that object the gate missed rather than a new one.
    fn near_live_track(&self, pts: &[&RadarPoint]) -> bool {
        let Some(g) = self.config.contour_gate else {
            return false;
        };
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
        self.tracks.iter().filter(|t| t.status != TrackStatus::Terminated).any(|t| {
            let (dx, dy) = (cx - t.mean[0], cy - t.mean[1]);
            dx.hypot(dy) - self.model.radius_at_angle(dy.atan2(dx) - t.mean[PHI], &t.radii()) <= 2.0 * g
        })
    }

    fn birth_track(&mut self, region: &BirthRegion, pts: &[&RadarPoint]) -> Track {
        let n = pts.len() as f64;
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
        let rr = pts.iter().map(|p| p.range_rate).sum::<f64>() / n;
        let (dx, dy) = (cx - self.sensor_xy[0], cy - self.sensor_xy[1]);
        let dist = dx.hypot(dy).max(1e-9);
        let (ux, uy) = (dx / dist, dy / dist);
        let heading = region.initial_heading;
        // Range rate is the speed projected on the line of sight.
        let proj = ux * heading.cos() + uy * heading.sin();
        let mut speed = self.config.default_speed;
        if proj.abs() > 0.3 {
            let v = rr / proj;
            if v > 0.0 {
                speed = v.min(self.config.max_speed);
            }
        }
        let off = self.config.birth_offset;
        let state = [cx + off * ux, cy + off * uy, speed, 0.0, heading, 0.0];
        let cov = Matrix6::from_diagonal(&nalgebra::Vector6::from_iterator(
            self.config.initial_std.iter().map(|s| s * s),
        ));
        let kin = KinematicState::new(state, cov);
        let radii = match self.config.birth_extent {
            Some([l, w]) => DVector::from_iterator(self.model.basis.len(), self.model.basis.iter().map(|&t| rectangle_radius(l, w, t))),
            None => DVector::from_element(self.config.gp.n_theta, self.config.gp.mean_radius),
        };
        let contour = ContourState {
            radii,
            covariance: self.model.gram.clone(),
            basis_angles: self.model.basis.clone(),
        };
        let id = self.next_id;
        self.next_id += 1;
        Track::new(id, &kin, &contour)
    }
}

/// Runs the tracker over time-ordered frames of flattened points.
pub fn run_tracker(
    frames: &[(f64, Vec<RadarPoint>)],
    sensor_xy: [f64; 2],
    birth_regions: Vec<BirthRegion>,
    config: &TrackerConfig,
) -> Result<Vec<Track>> {
    let mut tracker = Tracker::new(config.clone(), sensor_xy, birth_regions)?;
    for (t, pts) in frames {
        tracker.step(*t, pts)?;
    }
    Ok(tracker.into_tracks())
}
