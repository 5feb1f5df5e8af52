//! Semantic ICP in the plane: correspondences only between points with the
//! same behavior label, weighted per label.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coarse::{iterate_icp, ConvergedBy, IcpParams};
use crate::geometry::{align_rigid_2d, BehaviorLabel, GridIndex, LabeledCloud, Pose2};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SicpParams {
    pub max_correspondence: f64,
    pub max_iterations: usize,
    pub rmse_epsilon: f64,
    /// Pair weight per label, indexed by [`BehaviorLabel::index`].
    pub class_weights: [f64; 3],
}

impl Default for SicpParams {
    fn default() -> Self {
        Self {
            max_correspondence: 50.0,
            max_iterations: 100,
            rmse_epsilon: 1e-4,
            class_weights: [1.0; 3],
        }
    }
}

impl SicpParams {
    pub fn weight(&self, label: BehaviorLabel) -> f64 {
        self.class_weights[label.index()]
    }

    fn icp(&self) -> IcpParams {
        IcpParams {
            max_correspondence: self.max_correspondence,
            max_iterations: self.max_iterations,
            rmse_epsilon: self.rmse_epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.icp().validate()?;
        if self.class_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("class weights must be finite and non-negative".into()));
        }
        if self.class_weights.iter().all(|w| *w == 0.0) {
            return Err(Error::InvalidParameter("all class weights are zero".into()));
        }
        Ok(())
    }
}

/// A matched pair; `residual = target − T·source` in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub target: usize,
    pub label: BehaviorLabel,
    pub residual: [f64; 2],
}

/// One planar index per label over the target cloud, keeping original indices.
struct LabelIndex {
    grids: [Option<(GridIndex, Vec<usize>)>; 3],
}

impl LabelIndex {
    fn new(target: &LabeledCloud, max_dist: f64) -> Self {
        let grids = BehaviorLabel::ALL.map(|label| {
            let ids: Vec<usize> = (0..target.len()).filter(|&i| target.points[i].label == label).collect();
            if ids.is_empty() {
                return None;
            }
            let pts = ids.iter().map(|&i| [target.points[i].x, target.points[i].y, 0.0]).collect();
            Some((GridIndex::with_auto_cell(pts, max_dist), ids))
        });
        Self { grids }
    }

    /// Nearest same-label target as (original index, position, distance).
    fn nearest(&self, label: BehaviorLabel, q: [f64; 2], max_dist: f64) -> Option<(usize, [f64; 2], f64)> {
        let (grid, ids) = self.grids[label.index()].as_ref()?;
        grid.nearest([q[0], q[1], 0.0], max_dist).map(|(i, d)| {
            let p = grid.points()[i];
            (ids[i], [p[0], p[1]], d)
        })
    }
}

fn correspondences_with(
    source: &LabeledCloud,
    index: &LabelIndex,
    t: &Pose2,
    params: &SicpParams,
) -> Vec<Correspondence> {
    source
        .points
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            if params.weight(p.label) == 0.0 {
                return None;
            }
            let q = t.apply([p.x, p.y]);
            index
                .nearest(p.label, q, params.max_correspondence)
                .map(|(j, r, _)| Correspondence {
                    source: i,
                    target: j,
                    label: p.label,
                    residual: [r[0] - q[0], r[1] - q[1]],
                })
        })
        .collect()
}

/// For each source point, the nearest target point with the same label within
/// `max_correspondence` (ties to the lowest target index). Labels with zero
/// weight are skipped.
pub fn semantic_correspondences(
    source: &LabeledCloud,
    target: &LabeledCloud,
    t: &Pose2,
    params: &SicpParams,
) -> Vec<Correspondence> {
    let index = LabelIndex::new(target, params.max_correspondence);
    correspondences_with(source, &index, t, params)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SicpResult {
    pub transform: Pose2,
    /// Matched fraction of the source points whose label has non-zero weight.
    pub fitness: f64,
    /// Matched fraction per label; `None` if the source has no such points.
    pub label_fitness: [Option<f64>; 3],
    /// Weighted RMSE over matched pairs.
    pub rmse: f64,
    pub iterations: usize,
    pub converged_by: ConvergedBy,
    pub rmse_trace: Vec<f64>,
}

/// The `t_fine` record: pose plus headline diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinePose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub rmse: f64,
    pub fitness: f64,
    pub iterations: usize,
}

impl SicpResult {
    pub fn fine_pose(&self) -> FinePose {
        FinePose {
            x: self.transform.x,
            y: self.transform.y,
            yaw: self.transform.yaw,
            rmse: self.rmse,
            fitness: self.fitness,
            iterations: self.iterations,
        }
    }
}

impl FinePose {
    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.yaw)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("pose serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

struct PairSet {
    pairs: Vec<([f64; 2], [f64; 2])>,
    weights: Vec<f64>,
    matched_per_label: [usize; 3],
    rmse: f64,
}

/// Iterates same-label matching and weighted rigid alignment from `init`.
pub fn sicp_register(source: &LabeledCloud, target: &LabeledCloud, init: &Pose2, params: &SicpParams) -> Result<SicpResult> {
    params.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::NoOverlap { fitness: 0.0 });
    }
    let source_counts = source.label_counts();
    let target_counts = target.label_counts();
    let shared = BehaviorLabel::ALL
        .iter()
        .any(|l| source_counts[l.index()] > 0 && target_counts[l.index()] > 0 && params.weight(*l) > 0.0);
    if !shared {
        return Err(Error::NoOverlap { fitness: 0.0 });
    }
    let index = LabelIndex::new(target, params.max_correspondence);

    let eval = |t: &Pose2| {
        let corr = correspondences_with(source, &index, t, params);
        if corr.is_empty() {
            return None;
        }
        let mut set = PairSet {
            pairs: Vec::with_capacity(corr.len()),
            weights: Vec::with_capacity(corr.len()),
            matched_per_label: [0; 3],
            rmse: 0.0,
        };
        let (mut num, mut den) = (0.0, 0.0);
        for c in &corr {
            let w = params.weight(c.label);
            let p = &source.points[c.source];
            let q = t.apply([p.x, p.y]);
            let r = &target.points[c.target];
            set.pairs.push((q, [r.x, r.y]));
            set.weights.push(w);
            set.matched_per_label[c.label.index()] += 1;
            num += w * (c.residual[0] * c.residual[0] + c.residual[1] * c.residual[1]);
            den += w;
        }
        set.rmse = (num / den).sqrt();
        let rmse = set.rmse;
        Some((set, rmse))
    };
    let out = iterate_icp(*init, &params.icp(), eval, |set, t| {
        Ok(align_rigid_2d(&set.pairs, &set.weights)?.compose(t))
    })?;

    let m = &out.matches;
    let weighted_total: usize = BehaviorLabel::ALL
        .iter()
        .filter(|l| params.weight(**l) > 0.0)
        .map(|l| source_counts[l.index()])
        .sum();
    let label_fitness = BehaviorLabel::ALL.map(|l| {
        let n = source_counts[l.index()];
        (n > 0).then(|| m.matched_per_label[l.index()] as f64 / n as f64)
    });
    Ok(SicpResult {
        transform: out.transform,
        fitness: m.matched_per_label.iter().sum::<usize>() as f64 / weighted_total as f64,
        label_fitness,
        rmse: m.rmse,
        iterations: out.solves,
        converged_by: out.converged_by,
        rmse_trace: out.trace,
    })
}
