use super::{GridIndex, PointCloud};
use crate::{Error, Result};

/// Keeps the points that belong to some DBSCAN cluster (core points and
/// border points within `eps` of a core point); noise is dropped. Runs on the
/// 3D coordinates, range rate is ignored. Input order is preserved.
///
/// A point is core when at least `min_pts` points, itself included, lie
/// within `eps`.
pub fn dbscan_filter(cloud: &PointCloud, eps: f64, min_pts: usize) -> Result<PointCloud> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if min_pts < 1 {
        return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
    }
    if cloud.is_empty() {
        return Ok(PointCloud::new());
    }
    let index = GridIndex::new(cloud.positions(), eps);
    let neighbors: Vec<Vec<usize>> = (0..cloud.len())
        .map(|i| index.within(cloud.points[i].position(), eps))
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|n| n.len() >= min_pts).collect();
    Ok(cloud
        .iter()
        .enumerate()
        .filter(|(i, _)| core[*i] || neighbors[*i].iter().any(|&j| core[j]))
        .map(|(_, p)| *p)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RadarPoint;
    use proptest::prelude::*;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        pts.iter().map(|p| RadarPoint::new(p[0], p[1], p[2], 1.0)).collect()
    }

    /// Textbook DBSCAN: expand clusters from unvisited core points.
    fn brute_dbscan_members(pts: &[[f64; 3]], eps: f64, min_pts: usize) -> Vec<bool> {
        let n = pts.len();
        let d = |a: &[f64; 3], b: &[f64; 3]| {
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        };
        let region = |i: usize| (0..n).filter(|&j| d(&pts[i], &pts[j]) <= eps).collect::<Vec<_>>();
        let mut label = vec![None::<usize>; n];
        let mut cluster = 0;
        for i in 0..n {
            if label[i].is_some() || region(i).len() < min_pts {
                continue;
            }
            label[i] = Some(cluster);
            let mut queue = region(i);
            while let Some(j) = queue.pop() {
                if label[j].is_none() {
                    label[j] = Some(cluster);
                    let r = region(j);
                    if r.len() >= min_pts {
                        queue.extend(r);
                    }
                }
            }
            cluster += 1;
        }
        label.iter().map(|l| l.is_some()).collect()
    }

    #[test]
    fn isolated_point_is_noise() {
        let out = dbscan_filter(&cloud(&[[0.0, 0.0, 0.0]]), 1.0, 2).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn tight_group_kept() {
        let pts = [[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.1, 0.1, 0.0], [0.05, 0.05, 0.1]];
        assert_eq!(dbscan_filter(&cloud(&pts), 0.5, 3).unwrap().len(), 5);
    }

    #[test]
    fn two_clusters_and_midpoint_outlier() {
        let eps = 1.0;
        let mut pts = vec![];
        for base in [0.0, 100.0 * eps] {
            pts.extend([[base, 0.0, 0.0], [base + 0.3, 0.0, 0.0], [base, 0.3, 0.0], [base + 0.3, 0.3, 0.0]]);
        }
        pts.push([50.0 * eps, 0.0, 0.0]);
        let expected = brute_dbscan_members(&pts, eps, 3).iter().filter(|&&m| m).count();
        assert_eq!(expected, 8);
        let out = dbscan_filter(&cloud(&pts), eps, 3).unwrap();
        assert_eq!(out.len(), 8);
        assert!(out.iter().all(|p| p.x != 50.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(dbscan_filter(&PointCloud::new(), 0.0, 3).is_err());
        assert!(dbscan_filter(&PointCloud::new(), 1.0, 0).is_err());
    }

    proptest! {
        #[test]
        fn matches_textbook_and_is_permutation_invariant(
            pts in prop::collection::vec((0.0..10.0f64, 0.0..10.0f64, 0.0..1.0f64), 1..60),
            eps in 0.3..2.0f64,
            min_pts in 1usize..6,
            rot in 0usize..60,
        ) {
            let pts: Vec<[f64; 3]> = pts.iter().map(|&(x, y, z)| [x, y, z]).collect();
            let members = brute_dbscan_members(&pts, eps, min_pts);
            let out = dbscan_filter(&cloud(&pts), eps, min_pts).unwrap();
            let expected: Vec<[f64; 3]> = pts.iter().zip(&members).filter(|(_, &m)| m).map(|(p, _)| *p).collect();
            let got: Vec<[f64; 3]> = out.iter().map(|p| p.position()).collect();
            prop_assert_eq!(&got, &expected);

            let mut shuffled = pts.clone();
            shuffled.rotate_left(rot % pts.len());
            let mut a: Vec<[u64; 3]> = dbscan_filter(&cloud(&shuffled), eps, min_pts).unwrap()
                .iter().map(|p| p.position().map(f64::to_bits)).collect();
            let mut b: Vec<[u64; 3]> = got.iter().map(|p| p.map(f64::to_bits)).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
        }
    }
}
