//! Flat key-value pipeline configuration.
//!
//! A config file is a TOML document with one scalar per key. Every key can be
//! overridden on the command line as `--key value`. Relative paths in a file
//! resolve against the file's directory; paths given on the command line
//! resolve against the working directory.

use std::path::{Path, PathBuf};

use radarloc::coarse::{CoarseParams, IcpParams};
use radarloc::eot::{GpParams, Selection, TrackerConfig, DEFAULT_ETA, DEFAULT_V_MIN};
use radarloc::geometry::Transform3;
use radarloc::laneletmap::DEFAULT_GAMMA;
use radarloc::sicp::SicpParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

const PATH_KEYS: [&str; 5] = ["radar", "als", "map", "out", "truth"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub radar: PathBuf,
    pub als: PathBuf,
    pub map: PathBuf,
    pub out: PathBuf,
    /// Ground-truth JSON from `gen-scenario`. When set it supplies the
    /// initial pose and the report gains an error block.
    pub truth: Option<PathBuf>,
    pub seed: u64,

    pub init_x: Option<f64>,
    pub init_y: Option<f64>,
    pub init_z: Option<f64>,
    pub init_roll_deg: Option<f64>,
    pub init_pitch_deg: Option<f64>,
    pub init_yaw_deg: Option<f64>,
    /// Uniform perturbation bound of the initial x and y, meters.
    pub init_perturb_m: f64,
    /// Uniform perturbation bound of the initial yaw, degrees.
    pub init_perturb_deg: f64,

    pub lambda: f64,
    pub voxel: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    pub coarse_max_correspondence: f64,
    pub coarse_max_iterations: usize,
    pub coarse_rmse_epsilon: f64,
    pub coarse_stages: usize,
    pub coarse_min_correspondence: f64,

    pub gamma: f64,
    pub eta: f64,
    pub v_min: f64,
    /// Number of confirmed tracks drawn for the source cloud; 0 takes all.
    pub track_count: usize,

    pub sicp_max_correspondence: f64,
    pub sicp_max_iterations: usize,
    pub sicp_rmse_epsilon: f64,
    pub sicp_weight_left: f64,
    pub sicp_weight_right: f64,
    pub sicp_weight_straight: f64,

    pub gp_sigma_f: f64,
    pub gp_sigma_r: f64,
    pub gp_length_scale: f64,
    pub gp_tau: f64,
    pub n_theta: usize,
    pub gp_mean_radius: f64,
    /// Process noise standard deviations of `(x, y, v, a, φ, φ̇)` per √s.
    pub q_x: f64,
    pub q_y: f64,
    pub q_v: f64,
    pub q_a: f64,
    pub q_phi: f64,
    pub q_phi_dot: f64,
    pub measurement_std: f64,
    pub gate: f64,
    /// 0 disables the contour gate.
    pub contour_gate: f64,
    pub assoc_gate: f64,
    pub confirm_frames: usize,
    pub terminate_frames: usize,
    pub max_measurements: usize,
    pub birth_cluster_eps: f64,
    pub birth_min_points: usize,
    pub default_speed: f64,
    pub frame_period: f64,
    pub vehicle_length: f64,
    pub vehicle_width: f64,
    pub birth_inset: f64,
    pub birth_radius: f64,
    pub fov_horizontal_deg: f64,
    pub max_range: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let coarse = CoarseParams::default();
        let sicp = SicpParams::default();
        let tracker = TrackerConfig::default();
        let q = tracker.noise.process.map(f64::sqrt);
        let [vehicle_length, vehicle_width] = tracker.birth_extent.unwrap_or([4.5, 1.8]);
        Self {
            radar: "radar.csv".into(),
            als: "als.csv".into(),
            map: "map.json".into(),
            out: "out".into(),
            truth: None,
            seed: 0,
            init_x: None,
            init_y: None,
            init_z: None,
            init_roll_deg: None,
            init_pitch_deg: None,
            init_yaw_deg: None,
            init_perturb_m: 0.0,
            init_perturb_deg: 0.0,
            lambda: coarse.lambda,
            voxel: coarse.voxel,
            dbscan_eps: coarse.dbscan_eps,
            dbscan_min_pts: coarse.dbscan_min_pts,
            coarse_max_correspondence: coarse.icp.max_correspondence,
            coarse_max_iterations: coarse.icp.max_iterations,
            coarse_rmse_epsilon: coarse.icp.rmse_epsilon,
            coarse_stages: coarse.stages,
            coarse_min_correspondence: coarse.min_correspondence,
            gamma: DEFAULT_GAMMA,
            eta: DEFAULT_ETA,
            v_min: DEFAULT_V_MIN,
            track_count: 0,
            sicp_max_correspondence: sicp.max_correspondence,
            sicp_max_iterations: sicp.max_iterations,
            sicp_rmse_epsilon: sicp.rmse_epsilon,
            sicp_weight_left: sicp.class_weights[0],
            sicp_weight_right: sicp.class_weights[1],
            sicp_weight_straight: sicp.class_weights[2],
            gp_sigma_f: tracker.gp.sigma_f,
            gp_sigma_r: tracker.gp.sigma_r,
            gp_length_scale: tracker.gp.length_scale,
            gp_tau: tracker.gp.tau,
            n_theta: tracker.gp.n_theta,
            gp_mean_radius: tracker.gp.mean_radius,
            q_x: q[0],
            q_y: q[1],
            q_v: q[2],
            q_a: q[3],
            q_phi: q[4],
            q_phi_dot: q[5],
            measurement_std: tracker.noise.measurement_std,
            gate: tracker.gate,
            contour_gate: tracker.contour_gate.unwrap_or(0.0),
            assoc_gate: tracker.assoc_gate,
            confirm_frames: tracker.confirm_frames,
            terminate_frames: tracker.terminate_frames,
            max_measurements: tracker.max_measurements,
            birth_cluster_eps: tracker.birth_cluster_eps,
            birth_min_points: tracker.birth_min_points,
            default_speed: tracker.default_speed,
            frame_period: tracker.frame_period,
            vehicle_length,
            vehicle_width,
            birth_inset: 6.0,
            birth_radius: 8.0,
            fov_horizontal_deg: 120.0,
            max_range: 110.0,
        }
    }
}

/// Parses one override value as a TOML scalar, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Splits `--key value` and `--key=value` pairs; dashes in keys read as
/// underscores.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            return Err(CliError::input(format!("unexpected argument {a:?}; overrides take the form --key value")));
        };
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| CliError::input(format!("missing value for --{key}")))?;
                (key.to_string(), v.clone())
            }
        };
        out.push((key.replace('-', "_"), value));
    }
    Ok(out)
}

impl PipelineConfig {
    /// Reads `path` (if any) and applies the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
                let mut t: toml::Table = text.parse().map_err(|e: toml::de::Error| {
                    let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
                    CliError::input(format!("{}:{line}: {}", p.display(), e.message()))
                })?;
                let base = p.parent().unwrap_or(Path::new(""));
                for key in PATH_KEYS {
                    if let Some(toml::Value::String(s)) = t.get(key) {
                        let joined = base.join(s).to_string_lossy().into_owned();
                        t.insert(key.into(), toml::Value::String(joined));
                    }
                }
                t
            }
            None => toml::Table::new(),
        };
        for (k, v) in overrides {
            let value = if PATH_KEYS.contains(&k.as_str()) {
                toml::Value::String(v.clone())
            } else {
                parse_value(v)
            };
            table.insert(k.clone(), value);
        }
        let where_ = path.map(|p| p.display().to_string()).unwrap_or_else(|| "command line".into());
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::input(format!("{where_}: {}", e.message())))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn coarse_params(&self) -> CoarseParams {
        CoarseParams {
            lambda: self.lambda,
            voxel: self.voxel,
            dbscan_eps: self.dbscan_eps,
            dbscan_min_pts: self.dbscan_min_pts,
            trim: None,
            icp: IcpParams {
                max_correspondence: self.coarse_max_correspondence,
                max_iterations: self.coarse_max_iterations,
                rmse_epsilon: self.coarse_rmse_epsilon,
            },
            stages: self.coarse_stages,
            min_correspondence: self.coarse_min_correspondence,
        }
    }

    pub fn sicp_params(&self) -> SicpParams {
        SicpParams {
            max_correspondence: self.sicp_max_correspondence,
            max_iterations: self.sicp_max_iterations,
            rmse_epsilon: self.sicp_rmse_epsilon,
            class_weights: [self.sicp_weight_left, self.sicp_weight_right, self.sicp_weight_straight],
        }
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        let d = TrackerConfig::default();
        let q = [self.q_x, self.q_y, self.q_v, self.q_a, self.q_phi, self.q_phi_dot];
        TrackerConfig {
            gp: GpParams {
                sigma_f: self.gp_sigma_f,
                sigma_r: self.gp_sigma_r,
                length_scale: self.gp_length_scale,
                tau: self.gp_tau,
                n_theta: self.n_theta,
                mean_radius: self.gp_mean_radius,
            },
            noise: radarloc::eot::NoiseConfig {
                process: q.map(|s| s * s),
                measurement_std: self.measurement_std,
            },
            gate: self.gate,
            contour_gate: (self.contour_gate > 0.0).then_some(self.contour_gate),
            assoc_gate: self.assoc_gate,
            confirm_frames: self.confirm_frames,
            terminate_frames: self.terminate_frames,
            max_measurements: self.max_measurements,
            birth_cluster_eps: self.birth_cluster_eps,
            birth_min_points: self.birth_min_points,
            default_speed: self.default_speed,
            frame_period: self.frame_period,
            birth_extent: Some([self.vehicle_length, self.vehicle_width]),
            ..d
        }
    }

    pub fn selection(&self) -> Selection {
        match self.track_count {
            0 => Selection::All,
            count => Selection::Random { count, seed: self.seed },
        }
    }

    /// The initial guess for the coarse stage: the configured pose (or the
    /// truth pose when no init keys are given), with x, y and yaw perturbed
    /// uniformly from the seed.
    pub fn initial_pose(&self, truth: Option<&Transform3>) -> Result<Transform3, CliError> {
        let base = match (truth, self.init_x, self.init_y) {
            (_, Some(x), Some(y)) => {
                let z = self.init_z.unwrap_or(0.0);
                let rad = |v: Option<f64>| v.unwrap_or(0.0).to_radians();
                Transform3::from_euler([x, y, z], rad(self.init_roll_deg), rad(self.init_pitch_deg), rad(self.init_yaw_deg))
            }
            (Some(t), None, None) => *t,
            _ => return Err(CliError::input("initial pose needs init_x and init_y, or a truth file")),
        };
        if self.init_perturb_m == 0.0 && self.init_perturb_deg == 0.0 {
            return Ok(base);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut draw = |bound: f64| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 };
        let dx = draw(self.init_perturb_m);
        let dy = draw(self.init_perturb_m);
        let dyaw = draw(self.init_perturb_deg).to_radians();
        let (roll, pitch, yaw) = base.euler_angles();
        let t = base.translation;
        Ok(Transform3::from_euler([t.x + dx, t.y + dy, t.z], roll, pitch, yaw + dyaw))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_library_values() {
        let c = PipelineConfig::default();
        assert_eq!(c.gamma, 0.01);
        assert_eq!(c.eta, 0.01);
        assert_eq!(c.n_theta, 20);
        assert_eq!((c.sicp_max_correspondence, c.sicp_max_iterations, c.sicp_rmse_epsilon), (50.0, 100, 1e-4));
        assert_eq!(c.tracker_config(), TrackerConfig::default());
    }

    #[test]
    fn overrides_parse_scalars_and_paths() {
        let args: Vec<String> = ["--eta", "0.05", "--track-count=20", "--out", "123"].iter().map(|s| s.to_string()).collect();
        let o = parse_overrides(&args).unwrap();
        let c = PipelineConfig::load(None, &o).unwrap();
        assert_eq!(c.eta, 0.05);
        assert_eq!(c.track_count, 20);
        assert_eq!(c.out, PathBuf::from("123"));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let o = vec![("etaa".to_string(), "1".to_string())];
        assert!(PipelineConfig::load(None, &o).is_err());
    }

    #[test]
    fn file_paths_resolve_against_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "radar = \"r.csv\"\nseed = 4\n").unwrap();
        let c = PipelineConfig::load(Some(&p), &[]).unwrap();
        assert_eq!(c.radar, dir.path().join("r.csv"));
        assert_eq!(c.seed, 4);
    }

    #[test]
    fn perturbation_stays_in_bounds_and_keeps_pitch() {
        let truth = Transform3::from_euler([10.0, 20.0, 5.0], 0.0, 0.05, 0.3);
        let c = PipelineConfig {
            init_perturb_m: 5.0,
            init_perturb_deg: 5.0,
            seed: 9,
            ..Default::default()
        };
        let p = c.initial_pose(Some(&truth)).unwrap();
        assert!((p.translation.x - 10.0).abs() <= 5.0 && (p.translation.y - 20.0).abs() <= 5.0);
        assert_eq!(p.translation.z, 5.0);
        let (_, pitch, yaw) = p.euler_angles();
        assert!((pitch - 0.05).abs() < 1e-12);
        assert!((yaw - 0.3).abs() <= 5f64.to_radians() + 1e-12);
    }
}
