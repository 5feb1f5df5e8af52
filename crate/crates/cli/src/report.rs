//! Report and intermediate diagnostics written by the stages.

use std::path::Path;

use radarloc::coarse::{CoarseResult, ConvergedBy};
use radarloc::geometry::Transform3;
use radarloc::sicp::SicpResult;
use radarloc::sim::PoseError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

/// Per-label point counts in `[left, right, straight]` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub left: usize,
    pub right: usize,
    pub straight: usize,
}

impl From<[usize; 3]> for LabelCounts {
    fn from(c: [usize; 3]) -> Self {
        Self {
            left: c[0],
            right: c[1],
            straight: c[2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpStageDiag {
    pub fitness: f64,
    pub rmse: f64,
    pub iterations: usize,
    pub converged_by: ConvergedBy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseDiag {
    pub dynamic_points: usize,
    pub filtered_points: usize,
    pub target_points: usize,
    pub target_labels: LabelCounts,
    pub stages: Vec<IcpStageDiag>,
}

/// Contents of `coarse.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseArtifact {
    pub init: Transform3,
    pub t_coarse: Transform3,
    pub diagnostics: CoarseDiag,
    /// Timestamp of every radar frame, including frames without moving
    /// returns, so the tracker sees the true frame cadence.
    pub frame_times: Vec<f64>,
}

impl CoarseArtifact {
    pub fn new(init: Transform3, r: &CoarseResult, target_labels: [usize; 3], frame_times: Vec<f64>) -> Self {
        Self {
            init,
            t_coarse: r.transform,
            diagnostics: CoarseDiag {
                dynamic_points: r.dynamic_points,
                filtered_points: r.filtered_points,
                target_points: r.target_points,
                target_labels: target_labels.into(),
                stages: r
                    .stages
                    .iter()
                    .map(|s| IcpStageDiag {
                        fitness: s.fitness,
                        rmse: s.rmse,
                        iterations: s.iterations,
                        converged_by: s.converged_by,
                    })
                    .collect(),
            },
            frame_times,
        }
    }
}

/// Contents of `label.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDiag {
    pub tracks: usize,
    pub confirmed_tracks: usize,
    pub selected_tracks: usize,
    pub eta: f64,
    pub source_labels: LabelCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SicpDiag {
    pub fitness: f64,
    pub label_fitness: [Option<f64>; 3],
    pub rmse: f64,
    pub iterations: usize,
    pub converged_by: ConvergedBy,
    pub rmse_trace: Vec<f64>,
}

impl From<&SicpResult> for SicpDiag {
    fn from(r: &SicpResult) -> Self {
        Self {
            fitness: r.fitness,
            label_fitness: r.label_fitness,
            rmse: r.rmse,
            iterations: r.iterations,
            converged_by: r.converged_by,
            rmse_trace: r.rmse_trace.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub coarse: CoarseDiag,
    pub tracking: LabelDiag,
    pub sicp: SicpDiag,
    /// Present when the config names a truth file.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub truth_error: Option<TruthError>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthError {
    pub coarse: PoseError,
    pub utm: PoseError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub t_coarse: Transform3,
    pub t_fine: PlanarPose,
    pub t_utm: Transform3,
    pub diagnostics: Diagnostics,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("artifact serializes");
    std::fs::write(path, text + "\n").map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}:{}: {e}", path.display(), e.line())))
}
