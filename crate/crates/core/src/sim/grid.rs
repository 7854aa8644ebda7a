//! Uniform bucket grid for fixed-radius neighbor queries on a torus.

/// Cell grid over [0, side)^2 with cell edge >= query radius, so any
/// neighbor within the radius lives in the 3x3 cell block around a point.
pub struct CellGrid {
    side: f64,
    cells_per_axis: usize,
    cell_size: f64,
    buckets: Vec<Vec<usize>>,
}

impl CellGrid {
    pub fn build(points: &[[f64; 2]], side: f64, radius: f64) -> Self {
        let cells_per_axis = if radius <= 0.0 {
            1
        } else {
            ((side / radius).floor() as usize).max(1)
        };
        let cell_size = side / cells_per_axis as f64;
        let mut buckets = vec![Vec::new(); cells_per_axis * cells_per_axis];
        for (i, p) in points.iter().enumerate() {
            let (cx, cy) = Self::cell_of(p, cell_size, cells_per_axis);
            buckets[cy * cells_per_axis + cx].push(i);
        }
        Self {
            side,
            cells_per_axis,
            cell_size,
            buckets,
        }
    }

    fn cell_of(p: &[f64; 2], cell_size: f64, n: usize) -> (usize, usize) {
        let cx = ((p[0] / cell_size) as usize).min(n - 1);
        let cy = ((p[1] / cell_size) as usize).min(n - 1);
        (cx, cy)
    }

    /// Visit indices of all points in the 3x3 block of cells around `p`
    /// (with torus wraparound). The same index may be visited once only.
    pub fn for_each_candidate<F: FnMut(usize)>(&self, p: &[f64; 2], mut f: F) {
        let n = self.cells_per_axis;
        if n < 3 {
            // wraparound would revisit cells; fall back to all points
            for bucket in &self.buckets {
                for &i in bucket {
                    f(i);
                }
            }
            return;
        }
        let (cx, cy) = Self::cell_of(p, self.cell_size, n);
        for dy in [n - 1, 0, 1] {
            for dx in [n - 1, 0, 1] {
                let x = (cx + dx) % n;
                let y = (cy + dy) % n;
                for &i in &self.buckets[y * n + x] {
                    f(i);
                }
            }
        }
    }

    pub fn side(&self) -> f64 {
        self.side
    }
}

/// Squared torus distance on [0, side)^2.
pub fn torus_dist2(a: &[f64; 2], b: &[f64; 2], side: f64) -> f64 {
    let mut dx = (a[0] - b[0]).abs();
    let mut dy = (a[1] - b[1]).abs();
    if dx > side * 0.5 {
        dx = side - dx;
    }
    if dy > side * 0.5 {
        dy = side - dy;
    }
    dx * dx + dy * dy
}
