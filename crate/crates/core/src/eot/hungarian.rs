/// Minimum-cost assignment for a rectangular cost matrix given as rows.
/// Returns, for every row, the assigned column (or `None` when there are more
/// rows than columns).
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let transposed: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
        let mut out = vec![None; rows];
        for (j, i) in hungarian(&transposed).into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }

    // Shortest augmenting paths with potentials (rows ≤ cols), 1-based with a
    // virtual column 0.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Optimal one-to-one matching of measurements to candidates by Euclidean
/// distance; pairs farther apart than `gate` are dropped after solving.
/// Returns `(measurement, candidate)` index pairs sorted by measurement.
pub fn associate_hungarian(measurements: &[[f64; 2]], candidates: &[[f64; 2]], gate: f64) -> Vec<(usize, usize)> {
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let cost: Vec<Vec<f64>> = measurements
        .iter()
        .map(|&z| candidates.iter().map(|&c| dist(z, c)).collect())
        .collect();
    hungarian(&cost)
        .into_iter()
        .enumerate()
        .filter_map(|(i, j)| j.filter(|&j| cost[i][j] <= gate).map(|j| (i, j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn total(cost: &[Vec<f64>], a: &[Option<usize>]) -> f64 {
        a.iter().enumerate().filter_map(|(i, j)| j.map(|j| cost[i][j])).sum()
    }

    /// Exhaustive search over injective row→column maps.
    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        fn go(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>) -> f64 {
            if i == cost.len() {
                return 0.0;
            }
            let mut best = f64::INFINITY;
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(cost[i][j] + go(cost, i + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let rows = cost.len();
        let cols = cost[0].len();
        if rows <= cols {
            go(cost, 0, &mut vec![false; cols])
        } else {
            let t: Vec<Vec<f64>> = (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect();
            go(&t, 0, &mut vec![false; rows])
        }
    }

    #[test]
    fn two_by_two() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        let a = hungarian(&cost);
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert_eq!(total(&cost, &a), 2.0);
    }

    #[test]
    fn single_measurement_takes_nearest() {
        let pairs = associate_hungarian(&[[0.0, 0.0]], &[[3.0, 0.0], [1.0, 0.0], [0.0, 2.0]], 5.0);
        assert_eq!(pairs, vec![(0, 1)]);
    }

    #[test]
    fn identical_sets_match_identically() {
        let pts = [[0.0, 0.0], [2.0, 1.0], [-1.0, 4.0], [3.0, -2.0]];
        let pairs = associate_hungarian(&pts, &pts, 5.0);
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
    }

    #[test]
    fn gate_drops_far_pairs() {
        let pairs = associate_hungarian(&[[0.0, 0.0], [50.0, 0.0]], &[[0.5, 0.0], [1.0, 0.0]], 5.0);
        assert_eq!(pairs, vec![(0, 0)]);
        assert!(associate_hungarian(&[], &[[0.0, 0.0]], 5.0).is_empty());
        assert!(associate_hungarian(&[[0.0, 0.0]], &[], 5.0).is_empty());
    }

    proptest! {
        #[test]
        fn optimal_against_enumeration(rows in 1usize..6, cols in 1usize..6, seed in prop::collection::vec(0.0..10.0f64, 36)) {
            let cost: Vec<Vec<f64>> = (0..rows).map(|i| (0..cols).map(|j| seed[i * 6 + j]).collect()).collect();
            let a = hungarian(&cost);
            let assigned: Vec<usize> = a.iter().flatten().copied().collect();
            prop_assert_eq!(assigned.len(), rows.min(cols));
            let mut dedup = assigned.clone();
            dedup.sort();
            dedup.dedup();
            prop_assert_eq!(dedup.len(), assigned.len());
            prop_assert!((total(&cost, &a) - brute_force(&cost)).abs() < 1e-9);
        }
    }
}
