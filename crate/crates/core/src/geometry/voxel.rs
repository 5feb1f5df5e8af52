use std::collections::HashMap;

use super::{BehaviorLabel, LabeledCloud, LabeledPoint, PointCloud, RadarPoint};
use crate::{Error, Result};

fn check_voxel(voxel: f64) -> Result<()> {
    if voxel > 0.0 && voxel.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("voxel size must be positive, got {voxel}")))
    }
}

/// Groups point indices by voxel `floor(coord / voxel)`, voxels in order of
/// first occurrence.
fn group_by_voxel(positions: impl Iterator<Item = [f64; 3]>, voxel: f64) -> Vec<Vec<usize>> {
    let mut slot: HashMap<[i64; 3], usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, p) in positions.enumerate() {
        let key = p.map(|c| (c / voxel).floor() as i64);
        let g = *slot.entry(key).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

fn centroid(points: impl ExactSizeIterator<Item = [f64; 3]>) -> [f64; 3] {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for a in 0..3 {
            c[a] += p[a];
        }
    }
    c.map(|v| v / n)
}

/// One point per occupied voxel at the centroid of its members. Range rate is
/// not carried past the dynamic-point filter and is set to zero.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> Result<PointCloud> {
    check_voxel(voxel)?;
    let groups = group_by_voxel(cloud.iter().map(RadarPoint::position), voxel);
    Ok(groups
        .iter()
        .map(|g| {
            let [x, y, z] = centroid(g.iter().map(|&i| cloud.points[i].position()));
            RadarPoint::new(x, y, z, 0.0)
        })
        .collect())
}

/// Labeled variant: the voxel label is the majority label; ties go to
/// [`BehaviorLabel::Straight`].
pub fn voxel_downsample_labeled(cloud: &LabeledCloud, voxel: f64) -> Result<LabeledCloud> {
    check_voxel(voxel)?;
    let groups = group_by_voxel(cloud.iter().map(LabeledPoint::position), voxel);
    Ok(groups
        .iter()
        .map(|g| {
            let [x, y, z] = centroid(g.iter().map(|&i| cloud.points[i].position()));
            let label = majority_label(g.iter().map(|&i| cloud.points[i].label));
            LabeledPoint::new(x, y, z, label)
        })
        .collect())
}

pub(crate) fn majority_label(labels: impl Iterator<Item = BehaviorLabel>) -> BehaviorLabel {
    let mut counts = [0usize; 3];
    for l in labels {
        counts[l.index()] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&0);
    let mut winners = BehaviorLabel::ALL.iter().filter(|l| counts[l.index()] == top);
    match (winners.next(), winners.next()) {
        (Some(&only), None) => only,
        _ => BehaviorLabel::Straight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use BehaviorLabel::*;

    #[test]
    fn same_voxel_centroid() {
        let cloud: PointCloud = vec![
            RadarPoint::new(0.1, 0.1, 0.0, 3.0),
            RadarPoint::new(0.2, 0.2, 0.0, 5.0),
        ]
        .into();
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_abs_diff_eq!(out.points[0].x, 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(out.points[0].y, 0.15, epsilon = 1e-12);
        assert_eq!(out.points[0].z, 0.0);
    }

    #[test]
    fn distinct_voxels_kept() {
        let cloud: PointCloud = vec![
            RadarPoint::new(0.5, 0.0, 0.0, 0.0),
            RadarPoint::new(1.5, 0.0, 0.0, 0.0),
        ]
        .into();
        assert_eq!(voxel_downsample(&cloud, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn majority_vote() {
        // Counts {L: 2, S: 1}: L wins outright.
        let cloud: LabeledCloud = vec![
            LabeledPoint::new(0.1, 0.1, 0.0, LeftTurn),
            LabeledPoint::new(0.2, 0.3, 0.0, LeftTurn),
            LabeledPoint::new(0.4, 0.2, 0.0, Straight),
        ]
        .into();
        let out = voxel_downsample_labeled(&cloud, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.points[0].label, LeftTurn);

        assert_eq!(majority_label([LeftTurn, RightTurn].into_iter()), Straight);
        assert_eq!(majority_label([RightTurn, RightTurn, LeftTurn].into_iter()), RightTurn);
    }

    #[test]
    fn rejects_bad_voxel() {
        let cloud = PointCloud::new();
        assert!(voxel_downsample(&cloud, 0.0).is_err());
        assert!(voxel_downsample(&cloud, -1.0).is_err());
    }

    proptest! {
        #[test]
        fn output_near_voxel_centers(
            pts in prop::collection::vec((-20.0..20.0f64, -20.0..20.0f64, -2.0..2.0f64), 0..100),
            voxel in 0.1..5.0f64,
        ) {
            let cloud: PointCloud = pts.iter().map(|&(x, y, z)| RadarPoint::new(x, y, z, 0.0)).collect();
            let out = voxel_downsample(&cloud, voxel).unwrap();
            prop_assert!(out.len() <= cloud.len());
            let half_diag = voxel * 3f64.sqrt() / 2.0;
            for p in &out {
                let near = cloud.iter().any(|q| {
                    let c = q.position().map(|v| ((v / voxel).floor() + 0.5) * voxel);
                    let d = ((p.x - c[0]).powi(2) + (p.y - c[1]).powi(2) + (p.z - c[2]).powi(2)).sqrt();
                    d <= half_diag + 1e-9
                });
                prop_assert!(near);
            }
        }
    }
}
