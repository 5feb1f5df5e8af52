//! Extended object tracking with a Gaussian-process star-convex contour.
//!
//! Each track carries CTRA kinematics `[x, y, v, a, φ, φ̇]` and the contour
//! radii at fixed body-frame angles, estimated jointly by an unscented Kalman
//! filter. Measurements are matched to visible contour candidates with the
//! Hungarian algorithm before the update.

mod birth;
mod contour;
mod ctra;
mod export;
mod gp;
mod hungarian;
mod tracker;
mod ukf;

pub use birth::{birth_regions_from_map, FieldOfView};
pub use contour::{contour_polygon, contour_predict, generate_candidates, Candidate, ContourModel, ContourState};
pub use ctra::{ctra_predict, ctra_step, KinematicState};
pub use export::{
    export_source_cloud, histories, label_from_curvature, label_track_points, read_tracks, select_tracks,
    write_track_history, write_track_points, Selection, DEFAULT_ETA, DEFAULT_V_MIN,
};
pub use gp::{basis_angles, gp_gram, gp_kernel, gp_regress, GpParams};
pub use hungarian::{associate_hungarian, hungarian};
pub use tracker::{
    rectangle_radius, run_tracker, ukf_update, BirthRegion, HistoryEntry, NoiseConfig, Track, TrackHistory, TrackStatus, Tracker,
    TrackerConfig,
};
pub use ukf::{sigma_weights, SigmaWeights, UkfParams};
