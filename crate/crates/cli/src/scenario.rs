//! Scenario generation for `gen-scenario`.

use std::path::{Path, PathBuf};

use radarloc::coarse::write_recording;
use radarloc::geometry::io::write_point_cloud;
use radarloc::sim::{generate, ScenarioSpec};

use crate::CliError;

/// Specs shipped with the binary, with tracker settings tuned for each.
pub const BUNDLED: [(&str, &str, &str); 2] = [
    (
        "intersection",
        include_str!("../scenarios/intersection.json"),
        include_str!("../scenarios/intersection.toml"),
    ),
    (
        "two-right-turns",
        include_str!("../scenarios/two-right-turns.json"),
        include_str!("../scenarios/two-right-turns.toml"),
    ),
];

pub const RADAR: &str = "radar.csv";
pub const ALS: &str = "als.csv";
pub const MAP: &str = "map.json";
pub const TRUTH: &str = "truth.json";
pub const CONFIG: &str = "pipeline.toml";

/// Resolves a bundled name or a spec file path.
pub fn load_spec(name_or_path: &str) -> Result<(ScenarioSpec, Option<&'static str>), CliError> {
    if let Some((name, json, toml)) = BUNDLED.iter().find(|(n, _, _)| *n == name_or_path) {
        let spec = ScenarioSpec::from_json(json).map_err(|e| CliError::input(format!("bundled spec {name}: {e}")))?;
        return Ok((spec, Some(toml)));
    }
    let spec = ScenarioSpec::read(name_or_path).map_err(|e| CliError::input(e.to_string()))?;
    Ok((spec, None))
}

/// Writes the recording, road cloud, map and truth, plus a pipeline config
/// that points at them. Returns the config path.
pub fn gen_scenario(name_or_path: &str, out: &Path, seed: Option<u64>) -> Result<PathBuf, CliError> {
    let (mut spec, tuned) = load_spec(name_or_path)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate().map_err(|e| CliError::input(e.to_string()))?;
    let scenario = generate(&spec).map_err(|e| CliError::input(e.to_string()))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::input(format!("{}: {e}", out.display())))?;
    let io = |r: radarloc::Result<()>| r.map_err(|e| CliError::input(e.to_string()));
    io(write_recording(out.join(RADAR), &scenario.frames))?;
    io(write_point_cloud(out.join(ALS), &scenario.truth.als))?;
    io(scenario.truth.map.write(out.join(MAP)))?;
    io(scenario.truth.write(out.join(TRUTH)))?;

    let mut config = String::new();
    config.push_str(&format!("# Generated from scenario {:?}, seed {}.\n", spec.name, spec.seed));
    config.push_str(&format!("radar = \"{RADAR}\"\nals = \"{ALS}\"\nmap = \"{MAP}\"\ntruth = \"{TRUTH}\"\nout = \"out\"\n"));
    config.push_str(&format!("seed = {}\nframe_period = {:?}\n", spec.seed, spec.frame_period));
    config.push_str(&format!(
        "vehicle_length = {:?}\nvehicle_width = {:?}\nfov_horizontal_deg = {:?}\nmax_range = {:?}\n",
        spec.vehicle_length, spec.vehicle_width, spec.sensor.fov_horizontal_deg, spec.sensor.max_range
    ));
    if let Some(t) = tuned {
        config.push('\n');
        config.push_str(t);
    }
    let path = out.join(CONFIG);
    std::fs::write(&path, config).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(path)
}
