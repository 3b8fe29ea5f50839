use super::EnvError;

/// Square cells on a rectangular grid. Each cell is split into `U` equal
/// sectors with one GU at each sector centre; hover point `n` sits at
/// altitude `altitude` directly above GU `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub rows: usize,
    pub cols: usize,
    pub cell_side: f64,
    pub altitude: f64,
    /// Per-GU offsets from the cell centre, in meters.
    pub gu_offsets: Vec<[f64; 2]>,
}

impl Geometry {
    /// Sectors are a `k x k` sub-grid when `gus` is a perfect square,
    /// otherwise `gus` vertical strips.
    pub fn square(
        rows: usize,
        cols: usize,
        cell_side: f64,
        altitude: f64,
        gus: usize,
    ) -> Result<Self, EnvError> {
        if gus == 0 {
            return Err(EnvError::Invalid("at least one GU per cell".into()));
        }
        let k = (gus as f64).sqrt().round() as usize;
        let gu_offsets = if k * k == gus {
            let step = cell_side / k as f64;
            let mut v = Vec::with_capacity(gus);
            for r in 0..k {
                for c in 0..k {
                    v.push([
                        -cell_side / 2.0 + step * (c as f64 + 0.5),
                        -cell_side / 2.0 + step * (r as f64 + 0.5),
                    ]);
                }
            }
            v
        } else {
            let step = cell_side / gus as f64;
            (0..gus)
                .map(|c| [-cell_side / 2.0 + step * (c as f64 + 0.5), 0.0])
                .collect()
        };
        let geometry = Self {
            rows,
            cols,
            cell_side,
            altitude,
            gu_offsets,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(EnvError::Invalid("grid must have at least one cell".into()));
        }
        if !(self.cell_side > 0.0) || !(self.altitude > 0.0) {
            return Err(EnvError::Invalid(
                "cell side and altitude must be positive".into(),
            ));
        }
        let half = self.cell_side / 2.0;
        if self
            .gu_offsets
            .iter()
            .any(|o| o[0].abs() >= half || o[1].abs() >= half)
        {
            return Err(EnvError::Invalid("GU outside its cell".into()));
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.rows * self.cols
    }

    pub fn num_gus(&self) -> usize {
        self.gu_offsets.len()
    }

    /// The cell closest to the grid centre.
    pub fn center_cell(&self) -> usize {
        (self.rows / 2) * self.cols + self.cols / 2
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let r = cell / self.cols;
        let c = cell % self.cols;
        [
            (c as f64 - (self.cols as f64 - 1.0) / 2.0) * self.cell_side,
            (r as f64 - (self.rows as f64 - 1.0) / 2.0) * self.cell_side,
        ]
    }

    pub fn gu_position(&self, cell: usize, gu: usize) -> [f64; 2] {
        let c = self.cell_center(cell);
        let o = self.gu_offsets[gu];
        [c[0] + o[0], c[1] + o[1]]
    }

    pub fn hover_position(&self, cell: usize, hover: usize) -> [f64; 3] {
        let g = self.gu_position(cell, hover);
        [g[0], g[1], self.altitude]
    }

    /// Horizontal distance between two hover points of the same cell.
    pub fn hover_distance(&self, from: usize, to: usize) -> f64 {
        let a = self.gu_offsets[from];
        let b = self.gu_offsets[to];
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// GU indices ordered by distance from hover point `hover`; ties keep
    /// index order.
    pub fn nearest_gus(&self, hover: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.num_gus()).collect();
        idx.sort_by(|&a, &b| {
            self.hover_distance(hover, a)
                .total_cmp(&self.hover_distance(hover, b))
                .then(a.cmp(&b))
        });
        idx
    }
}

pub fn distance3(a: [f64; 3], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrant_layout() {
        let g = Geometry::square(7, 7, 1000.0, 100.0, 4).unwrap();
        assert_eq!(g.num_cells(), 49);
        assert_eq!(g.center_cell(), 24);
        assert_eq!(g.cell_center(24), [0.0, 0.0]);
        for o in &g.gu_offsets {
            assert_eq!(o[0].abs(), 250.0);
            assert_eq!(o[1].abs(), 250.0);
        }
        let h = g.hover_position(24, 3);
        assert_eq!(h, [250.0, 250.0, 100.0]);
        assert_eq!(g.hover_distance(0, 1), 500.0);
        assert!((g.hover_distance(0, 3) - 500.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn nearest_order_puts_own_gu_first_and_diagonal_last() {
        let g = Geometry::square(1, 1, 1000.0, 100.0, 4).unwrap();
        assert_eq!(g.nearest_gus(0), vec![0, 1, 2, 3]);
        assert_eq!(g.nearest_gus(3), vec![3, 1, 2, 0]);
    }

    #[test]
    fn single_and_strip_layouts() {
        let g = Geometry::square(1, 1, 1000.0, 100.0, 1).unwrap();
        assert_eq!(g.gu_offsets, vec![[0.0, 0.0]]);
        let g = Geometry::square(1, 1, 1000.0, 100.0, 2).unwrap();
        assert_eq!(g.gu_offsets, vec![[-250.0, 0.0], [250.0, 0.0]]);
    }
}
