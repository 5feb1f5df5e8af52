//! The four stages and their artifacts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use radarloc::coarse::{coarse_localize, extract_dynamic, flatten_to_plane, read_recording, write_recording, RadarFrame};
use radarloc::eot::{
    birth_regions_from_map, export_source_cloud, histories, read_tracks, run_tracker, select_tracks, write_track_history,
    write_track_points, FieldOfView,
};
use radarloc::geometry::io::{read_labeled_cloud, read_point_cloud, write_labeled_cloud};
use radarloc::geometry::{compose_final, transform_labeled_cloud, Pose2, PointCloud, RadarPoint, Transform3};
use radarloc::laneletmap::{crop_als_by_lanelets, LaneletMap};
use radarloc::sicp::{sicp_register, FinePose};
use radarloc::sim::{pose_error, ScenarioTruth};
use serde::{Deserialize, Serialize};

use crate::report::{read_json, write_json, CoarseArtifact, Diagnostics, LabelDiag, LocalizationReport, PlanarPose, TruthError};
use crate::{svg, CliError, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Coarse,
    Track,
    Label,
    Sicp,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Coarse, Stage::Track, Stage::Label, Stage::Sicp];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Coarse => "coarse",
            Stage::Track => "track",
            Stage::Label => "label",
            Stage::Sicp => "sicp",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// File names inside the output directory.
pub mod files {
    pub const TARGET: &str = "target.csv";
    pub const COARSE: &str = "coarse.json";
    pub const FLATTENED: &str = "flattened.csv";
    pub const TRACKS: &str = "tracks.jsonl";
    pub const TRACK_POINTS: &str = "track_points.csv";
    pub const SOURCE: &str = "source.csv";
    pub const LABEL: &str = "label.json";
    pub const FINE: &str = "t_fine.json";
    pub const REGISTERED: &str = "source_registered.csv";
    pub const REPORT: &str = "report.json";
    pub const OVERLAY: &str = "overlay.svg";
    pub const TIMINGS: &str = "timings.json";
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    stage: Stage,
}

impl Ctx<'_> {
    fn out(&self, name: &str) -> PathBuf {
        self.cfg.out.join(name)
    }

    /// Path of an artifact an earlier stage must have written.
    fn needs(&self, name: &str, producer: Stage) -> Result<PathBuf, CliError> {
        let p = self.out(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(CliError {
                code: crate::EXIT_INPUT,
                stage: Some(self.stage),
                message: format!("missing intermediate {} (written by stage {producer})", p.display()),
            })
        }
    }

    fn input(&self, p: &Path) -> Result<PathBuf, CliError> {
        if p.is_file() {
            Ok(p.to_path_buf())
        } else {
            Err(CliError {
                code: crate::EXIT_INPUT,
                stage: Some(self.stage),
                message: format!("input file {} not found", p.display()),
            })
        }
    }

    fn core<T>(&self, r: radarloc::Result<T>) -> Result<T, CliError> {
        r.map_err(|e| CliError::from_core(self.stage, e))
    }

    fn truth(&self) -> Result<Option<ScenarioTruth>, CliError> {
        match &self.cfg.truth {
            Some(p) => Ok(Some(self.core(ScenarioTruth::read(self.input(p)?))?)),
            None => Ok(None),
        }
    }

    fn map(&self) -> Result<LaneletMap, CliError> {
        self.core(LaneletMap::read(self.input(&self.cfg.map)?))
    }
}

fn coarse(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let frames = ctx.core(read_recording(ctx.input(&cfg.radar)?))?;
    let als = ctx.core(read_point_cloud(ctx.input(&cfg.als)?))?;
    let map = ctx.map()?;
    let truth = ctx.truth()?;
    let init = cfg.initial_pose(truth.as_ref().map(|t| &t.sensor_pose)).map_err(|mut e| {
        e.stage = Some(ctx.stage);
        e
    })?;

    let target = ctx.core(crop_als_by_lanelets(&als, &map, cfg.gamma))?;
    info!("target cloud: {} road points, labels {:?}", target.len(), target.label_counts());
    let road: PointCloud = target.iter().map(|p| RadarPoint::new(p.x, p.y, p.z, 0.0)).collect();
    let result = ctx.core(coarse_localize(&frames, &road, &init, &cfg.coarse_params()))?;
    info!(
        "coarse: {} dynamic points, {} after filtering, fitness {:.3}",
        result.dynamic_points,
        result.filtered_points,
        result.stages.last().map_or(0.0, |s| s.fitness)
    );

    let flattened: Vec<RadarFrame> = frames
        .iter()
        .map(|f| RadarFrame {
            timestamp: f.timestamp,
            points: flatten_to_plane(&extract_dynamic(std::slice::from_ref(f), cfg.lambda), &result.transform),
        })
        .collect();
    let frame_times = frames.iter().map(|f| f.timestamp).collect();
    ctx.core(write_labeled_cloud(ctx.out(files::TARGET), &target))?;
    ctx.core(write_recording(ctx.out(files::FLATTENED), &flattened))?;
    write_json(&ctx.out(files::COARSE), &CoarseArtifact::new(init, &result, target.label_counts(), frame_times))
}

fn track(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let coarse: CoarseArtifact = read_json(&ctx.needs(files::COARSE, Stage::Coarse)?)?;
    let flattened = ctx.core(read_recording(ctx.needs(files::FLATTENED, Stage::Coarse)?))?;
    let map = ctx.map()?;

    let mut by_time = flattened.into_iter().peekable();
    let frames: Vec<(f64, Vec<RadarPoint>)> = coarse
        .frame_times
        .iter()
        .map(|&t| match by_time.next_if(|f| f.timestamp == t) {
            Some(f) => (t, f.points.iter().copied().collect()),
            None => (t, Vec::new()),
        })
        .collect();
    if by_time.next().is_some() {
        return Err(CliError {
            code: crate::EXIT_INPUT,
            stage: Some(ctx.stage),
            message: format!("{} has frames missing from {}", files::FLATTENED, files::COARSE),
        });
    }

    let tc = coarse.t_coarse;
    let tracks = if frames.iter().all(|(_, p)| p.is_empty()) {
        warn!("flattened cloud is empty; writing an empty track file");
        Vec::new()
    } else {
        let fov = FieldOfView {
            pose: tc.to_pose2(),
            horizontal: cfg.fov_horizontal_deg.to_radians(),
            max_range: cfg.max_range,
        };
        let births = birth_regions_from_map(&map, &fov, cfg.birth_inset, cfg.birth_radius);
        info!("{} birth regions", births.len());
        let tracks = ctx.core(run_tracker(&frames, [tc.translation.x, tc.translation.y], births, &cfg.tracker_config()))?;
        histories(&tracks)
    };
    info!("{} tracks, {} confirmed", tracks.len(), tracks.iter().filter(|t| t.was_confirmed()).count());
    ctx.core(write_track_history(ctx.out(files::TRACKS), &tracks))?;
    ctx.core(write_track_points(ctx.out(files::TRACK_POINTS), &tracks))
}

fn label(ctx: &Ctx) -> Result<(), CliError> {
    let cfg = ctx.cfg;
    let tracks = ctx.core(read_tracks(
        ctx.needs(files::TRACKS, Stage::Track)?,
        ctx.needs(files::TRACK_POINTS, Stage::Track)?,
    ))?;
    let confirmed = tracks.iter().filter(|t| t.was_confirmed()).count();
    if confirmed == 0 {
        return Err(CliError::stage(ctx.stage, "no confirmed tracks"));
    }
    let selection = cfg.selection();
    let selected = ctx.core(select_tracks(&tracks, &selection))?.len();
    let source = ctx.core(export_source_cloud(&tracks, &selection, cfg.eta, cfg.v_min))?;
    if source.is_empty() {
        return Err(CliError::stage(ctx.stage, "selected tracks carry no labeled points"));
    }
    let diag = LabelDiag {
        tracks: tracks.len(),
        confirmed_tracks: confirmed,
        selected_tracks: selected,
        eta: cfg.eta,
        source_labels: source.label_counts().into(),
    };
    info!("source cloud: {} points from {selected} tracks, labels {:?}", source.len(), source.label_counts());
    ctx.core(write_labeled_cloud(ctx.out(files::SOURCE), &source))?;
    write_json(&ctx.out(files::LABEL), &diag)
}

fn sicp(ctx: &Ctx) -> Result<LocalizationReport, CliError> {
    let cfg = ctx.cfg;
    let coarse: CoarseArtifact = read_json(&ctx.needs(files::COARSE, Stage::Coarse)?)?;
    let target = ctx.core(read_labeled_cloud(ctx.needs(files::TARGET, Stage::Coarse)?))?;
    let labels: LabelDiag = read_json(&ctx.needs(files::LABEL, Stage::Label)?)?;
    let source = ctx.core(read_labeled_cloud(ctx.needs(files::SOURCE, Stage::Label)?))?;
    let truth = ctx.truth()?;

    let result = ctx.core(sicp_register(&source, &target, &Pose2::identity(), &cfg.sicp_params()))?;
    info!(
        "sicp: {} iterations ({:?}), fitness {:.3}, rmse {:.3}",
        result.iterations, result.converged_by, result.fitness, result.rmse
    );
    let fine = result.fine_pose();
    ctx.core(fine.write(ctx.out(files::FINE)))?;
    // Compose from the serialized pose so the report holds exactly what a
    // reader recomputes from its own fields.
    let fine = ctx.core(FinePose::read(ctx.out(files::FINE)))?;
    let t_utm = compose_final(&fine.pose(), &coarse.t_coarse);

    let registered = transform_labeled_cloud(&fine.pose(), &source);
    ctx.core(write_labeled_cloud(ctx.out(files::REGISTERED), &registered))?;
    let sensor = [coarse.t_coarse.translation.x, coarse.t_coarse.translation.y];
    let plot = svg::overlay(&target, &source, &registered, sensor);
    let plot_path = ctx.out(files::OVERLAY);
    std::fs::write(&plot_path, plot).map_err(|e| CliError::input(format!("{}: {e}", plot_path.display())))?;

    let report = LocalizationReport {
        t_coarse: coarse.t_coarse,
        t_fine: PlanarPose {
            x: fine.x,
            y: fine.y,
            yaw: fine.yaw,
        },
        t_utm,
        diagnostics: Diagnostics {
            coarse: coarse.diagnostics,
            tracking: labels,
            sicp: (&result).into(),
            truth_error: truth.map(|t| TruthError {
                coarse: pose_error(&coarse.t_coarse, &t.sensor_pose),
                utm: pose_error(&t_utm, &t.sensor_pose),
            }),
        },
    };
    write_json(&ctx.out(files::REPORT), &report)?;
    Ok(report)
}

fn record_timing(cfg: &PipelineConfig, stage: Stage, seconds: f64) -> Result<(), CliError> {
    let path = cfg.out.join(files::TIMINGS);
    let mut t: BTreeMap<Stage, f64> = if path.is_file() { read_json(&path).unwrap_or_default() } else { BTreeMap::new() };
    t.insert(stage, seconds);
    write_json(&path, &t)
}

fn prepare_out(cfg: &PipelineConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::input(format!("{}: {e}", cfg.out.display())))
}

fn execute(cfg: &PipelineConfig, stage: Stage) -> Result<Option<LocalizationReport>, CliError> {
    let ctx = Ctx { cfg, stage };
    let start = Instant::now();
    info!("stage {stage}");
    let report = match stage {
        Stage::Coarse => coarse(&ctx).map(|_| None),
        Stage::Track => track(&ctx).map(|_| None),
        Stage::Label => label(&ctx).map(|_| None),
        Stage::Sicp => sicp(&ctx).map(Some),
    }?;
    record_timing(cfg, stage, start.elapsed().as_secs_f64())?;
    Ok(report)
}

/// Runs exactly one stage from the artifacts already in the output directory.
pub fn run_stage(cfg: &PipelineConfig, stage: Stage) -> Result<(), CliError> {
    prepare_out(cfg)?;
    execute(cfg, stage).map(|_| ())
}

/// Runs all stages in order and returns the report also written to
/// `report.json`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<LocalizationReport, CliError> {
    prepare_out(cfg)?;
    let mut report = None;
    for stage in Stage::ALL {
        report = execute(cfg, stage)?;
    }
    Ok(report.expect("sicp stage yields the report"))
}

/// The pose the report claims, recomputed from its serialized parts.
pub fn recompose(report: &LocalizationReport) -> Transform3 {
    compose_final(&Pose2::new(report.t_fine.x, report.t_fine.y, report.t_fine.yaw), &report.t_coarse)
}
