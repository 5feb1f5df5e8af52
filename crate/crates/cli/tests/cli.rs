use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use radarloc::coarse::read_recording;
use radarloc::sim::ScenarioTruth;
use radarloc_cli::pipeline::{files, recompose};
use radarloc_cli::report::{read_json, LabelDiag};
use radarloc_cli::LocalizationReport;

fn radarloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radarloc"))
        .args(args)
        .env("RUST_LOG", "info")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// The two-right-turns scenario, generated once per test run.
fn scenario() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = scratch("scenario");
        let o = radarloc(&["gen-scenario", "two-right-turns", "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        dir
    })
}

fn config() -> String {
    scenario().join("pipeline.toml").to_string_lossy().into_owned()
}

/// A full run of the scenario, shared by tests that only read its outputs.
fn full_run() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let out = scratch("full");
        let o = radarloc(&["--config", &config(), "--out", out.to_str().unwrap(), "run", "--init-perturb-m", "2", "--init-perturb-deg", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    })
}

#[test]
fn bundled_intersection_writes_scenario_files() {
    let out = scratch("intersection");
    let o = radarloc(&["gen-scenario", "intersection", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["radar.csv", "als.csv", "map.json", "truth.json"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let frames = read_recording(out.join("radar.csv")).unwrap();
    assert!(frames.iter().map(|f| f.points.len()).sum::<usize>() > 0);
}

#[test]
fn seed_changes_noise_but_not_geometry() {
    let a = scratch("seed-a");
    let b = scratch("seed-b");
    for (dir, seed) in [(&a, "3"), (&b, "4")] {
        let o = radarloc(&["gen-scenario", "two-right-turns", "--seed", seed, "--out", dir.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    assert_ne!(read(&a, "radar.csv"), read(&b, "radar.csv"));
    assert_eq!(read(&a, "map.json"), read(&b, "map.json"));
    assert_eq!(read(&a, "als.csv"), read(&b, "als.csv"));
}

#[test]
fn two_right_turns_truth_turns_right_twice() {
    let truth = ScenarioTruth::read(scenario().join("truth.json")).unwrap();
    assert!(!truth.vehicles.is_empty());
    for v in &truth.vehicles {
        let rates: Vec<f64> = v.states.iter().map(|s| s.state[5]).collect();
        let intervals = rates.windows(2).filter(|w| w[0] >= 0.0 && w[1] < 0.0).count() + usize::from(rates[0] < 0.0);
        assert_eq!(intervals, 2, "vehicle {}", v.id);
        assert!(rates.iter().all(|r| *r <= 0.0));
    }
}

#[test]
fn report_composition_holds_as_serialized() {
    let report: LocalizationReport = read_json(&full_run().join(files::REPORT)).unwrap();
    assert_eq!(recompose(&report), report.t_utm);
}

#[test]
fn stage_by_stage_matches_full_run() {
    let out = scratch("staged");
    for stage in ["coarse", "track", "label", "sicp"] {
        let o = radarloc(&[
            "--config",
            &config(),
            "--out",
            out.to_str().unwrap(),
            "stage",
            stage,
            "--init-perturb-m",
            "2",
            "--init-perturb-deg",
            "2",
        ]);
        assert!(o.status.success(), "stage {stage}: {}", stderr(&o));
    }
    for f in [
        files::TARGET,
        files::COARSE,
        files::FLATTENED,
        files::TRACKS,
        files::TRACK_POINTS,
        files::SOURCE,
        files::LABEL,
        files::FINE,
        files::REGISTERED,
        files::REPORT,
        files::OVERLAY,
    ] {
        let a = std::fs::read(full_run().join(f)).unwrap();
        let b = std::fs::read(out.join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn larger_eta_labels_fewer_turn_points() {
    let out = scratch("eta");
    for f in [files::TRACKS, files::TRACK_POINTS] {
        std::fs::copy(full_run().join(f), out.join(f)).unwrap();
    }
    let o = radarloc(&["--config", &config(), "--out", out.to_str().unwrap(), "stage", "label", "--eta", "0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let base: LabelDiag = read_json(&full_run().join(files::LABEL)).unwrap();
    let wide: LabelDiag = read_json(&out.join(files::LABEL)).unwrap();
    let turns = |d: &LabelDiag| d.source_labels.left + d.source_labels.right;
    assert_eq!(base.eta, 0.01);
    assert!(turns(&wide) < turns(&base), "{} vs {}", turns(&wide), turns(&base));
}

#[test]
fn empty_flattened_cloud_gives_empty_track_file() {
    let out = scratch("empty-track");
    std::fs::copy(full_run().join(files::COARSE), out.join(files::COARSE)).unwrap();
    std::fs::write(out.join(files::FLATTENED), "timestamp,x,y,z,range_rate\n").unwrap();
    let o = radarloc(&["--config", &config(), "--out", out.to_str().unwrap(), "stage", "track"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("WARN"));
    assert_eq!(std::fs::read_to_string(out.join(files::TRACKS)).unwrap(), "");
}

#[test]
fn static_recording_fails_in_coarse_stage() {
    let out = scratch("static");
    std::fs::write(out.join("radar.csv"), "timestamp,x,y,z,range_rate\n0,10,1,0,0\n0,12,2,0,0.1\n0.05,11,1,0,-0.2\n").unwrap();
    let radar = out.join("radar.csv");
    let o = radarloc(&["--config", &config(), "--out", out.to_str().unwrap(), "run", "--radar", radar.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage coarse failed"), "{}", stderr(&o));
}

#[test]
fn missing_intermediate_is_named() {
    let out = scratch("missing");
    let o = radarloc(&["--config", &config(), "--out", out.to_str().unwrap(), "stage", "sicp"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(files::COARSE), "{}", stderr(&o));
}

#[test]
fn malformed_input_reports_file_and_line() {
    let out = scratch("malformed");
    let radar = out.join("radar.csv");
    std::fs::write(&radar, "timestamp,x,y,z,range_rate\n0,1,2,3,4\n0,1,oops,3,4\n").unwrap();
    let o = radarloc(&["--config", &config(), "--out", out.to_str().unwrap(), "stage", "coarse", "--radar", radar.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("radar.csv:3"), "{}", stderr(&o));
}

#[test]
fn unknown_override_is_an_input_error() {
    let o = radarloc(&["--config", &config(), "run", "--no-such-key", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));
}
