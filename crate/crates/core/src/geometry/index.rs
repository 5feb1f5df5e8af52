/// Uniform grid over the xy-plane for exact nearest-neighbor and radius
/// queries. Distances are full 3D; the xy grid only prunes, which is valid
/// because the planar distance bounds the spatial one from below.
///
/// Ties in nearest-neighbor distance resolve to the lowest point index.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<[f64; 3]>,
    cell: f64,
    origin: [f64; 2],
    dims: [usize; 2],
    // CSR layout: points of cell c are order[starts[c]..starts[c + 1]], ascending.
    starts: Vec<u32>,
    order: Vec<u32>,
}

const MAX_CELLS: usize = 1 << 24;

impl GridIndex {
    /// Builds the index; `cell` is grown if the bounding box would need more
    /// than ~16M cells.
    pub fn new(points: Vec<[f64; 3]>, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0; 2];
            hi = [0.0; 2];
        }
        let mut cell = cell;
        let dims = loop {
            let nx = ((hi[0] - lo[0]) / cell).floor() as usize + 1;
            let ny = ((hi[1] - lo[1]) / cell).floor() as usize + 1;
            if nx.saturating_mul(ny) <= MAX_CELLS.max(4 * points.len()) {
                break [nx, ny];
            }
            cell *= 2.0;
        };

        let mut index = GridIndex {
            points,
            cell,
            origin: lo,
            dims,
            starts: vec![0; dims[0] * dims[1] + 1],
            order: Vec::new(),
        };
        let cell_of: Vec<usize> = index
            .points
            .iter()
            .map(|p| {
                let (cx, cy) = index.cell_coords(p);
                cy as usize * dims[0] + cx as usize
            })
            .collect();
        for &c in &cell_of {
            index.starts[c + 1] += 1;
        }
        for c in 0..dims[0] * dims[1] {
            index.starts[c + 1] += index.starts[c];
        }
        let mut fill = index.starts.clone();
        index.order = vec![0; index.points.len()];
        for (i, &c) in cell_of.iter().enumerate() {
            index.order[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        index
    }

    /// Picks a cell holding a few points on average, capped at `max_cell`.
    pub fn with_auto_cell(points: Vec<[f64; 3]>, max_cell: f64) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let area = ((hi[0] - lo[0]) * (hi[1] - lo[1])).max(0.0);
        let cell = (4.0 * area / points.len().max(1) as f64).sqrt();
        let cell = if cell.is_finite() && cell > 0.0 { cell.min(max_cell) } else { max_cell };
        Self::new(points, cell.max(max_cell * 1e-3))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    fn cell_coords(&self, p: &[f64; 3]) -> (i64, i64) {
        (
            ((p[0] - self.origin[0]) / self.cell).floor() as i64,
            ((p[1] - self.origin[1]) / self.cell).floor() as i64,
        )
    }

    fn cell_points(&self, cx: i64, cy: i64) -> &[u32] {
        if cx < 0 || cy < 0 || cx >= self.dims[0] as i64 || cy >= self.dims[1] as i64 {
            return &[];
        }
        let c = cy as usize * self.dims[0] + cx as usize;
        &self.order[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    fn dist2(&self, i: u32, q: &[f64; 3]) -> f64 {
        let p = &self.points[i as usize];
        let (dx, dy, dz) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
        dx * dx + dy * dy + dz * dz
    }

    /// Nearest point within `max_dist` of `q` as `(index, distance)`.
    pub fn nearest(&self, q: [f64; 3], max_dist: f64) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (qx, qy) = self.cell_coords(&q);
        let max2 = max_dist * max_dist;
        let mut best: Option<(f64, u32)> = None;
        let consider = |best: &mut Option<(f64, u32)>, i: u32| {
            let d2 = self.dist2(i, &q);
            if d2 > max2 {
                return;
            }
            match *best {
                Some((bd, bi)) if d2 > bd || (d2 == bd && i >= bi) => {}
                _ => *best = Some((d2, i)),
            }
        };

        // Ring k covers cells at Chebyshev distance k from the query cell.
        let reach_x = (qx.max(self.dims[0] as i64 - 1 - qx)).max(0);
        let reach_y = (qy.max(self.dims[1] as i64 - 1 - qy)).max(0);
        let far = reach_x.max(reach_y);
        for k in 0..=far {
            if k > 0 {
                // Planar distance from q to anything outside the (2k-1)-wide block.
                let bx0 = q[0] - (self.origin[0] + (qx - k + 1) as f64 * self.cell);
                let bx1 = self.origin[0] + (qx + k) as f64 * self.cell - q[0];
                let by0 = q[1] - (self.origin[1] + (qy - k + 1) as f64 * self.cell);
                let by1 = self.origin[1] + (qy + k) as f64 * self.cell - q[1];
                let lb = bx0.min(bx1).min(by0).min(by1).max(0.0);
                let lb2 = lb * lb;
                if lb2 > max2 {
                    break;
                }
                if let Some((bd, _)) = best {
                    if lb2 > bd {
                        break;
                    }
                }
            }
            if k == 0 {
                for &i in self.cell_points(qx, qy) {
                    consider(&mut best, i);
                }
                continue;
            }
            let (x0, x1, y0, y1) = (qx - k, qx + k, qy - k, qy + k);
            let cx_lo = x0.max(0);
            let cx_hi = x1.min(self.dims[0] as i64 - 1);
            for cx in cx_lo..=cx_hi {
                for &i in self.cell_points(cx, y0) {
                    consider(&mut best, i);
                }
                for &i in self.cell_points(cx, y1) {
                    consider(&mut best, i);
                }
            }
            let cy_lo = (y0 + 1).max(0);
            let cy_hi = (y1 - 1).min(self.dims[1] as i64 - 1);
            for cy in cy_lo..=cy_hi {
                for &i in self.cell_points(x0, cy) {
                    consider(&mut best, i);
                }
                for &i in self.cell_points(x1, cy) {
                    consider(&mut best, i);
                }
            }
        }
        best.map(|(d2, i)| (i as usize, d2.sqrt()))
    }

    /// Indices of all points within `radius` of `q` (inclusive), ascending.
    pub fn within(&self, q: [f64; 3], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let lo = self.cell_coords(&[q[0] - radius, q[1] - radius, 0.0]);
        let hi = self.cell_coords(&[q[0] + radius, q[1] + radius, 0.0]);
        let mut out = Vec::new();
        for cy in lo.1.max(0)..=hi.1.min(self.dims[1] as i64 - 1) {
            for cx in lo.0.max(0)..=hi.0.min(self.dims[0] as i64 - 1) {
                out.extend(
                    self.cell_points(cx, cy)
                        .iter()
                        .filter(|&&i| self.dist2(i, &q) <= r2)
                        .map(|&i| i as usize),
                );
            }
        }
        out.sort_unstable();
        out
    }
}
