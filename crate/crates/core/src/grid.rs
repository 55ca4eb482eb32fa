//! Uniform Cartesian grid bookkeeping.
//!
//! Level-set values live at nodes, concentrations at cell centers. Node `(i, j)`
//! sits at `origin + (i h, j h)`; cell `(i, j)` is the square spanned by nodes
//! `(i, j)` and `(i + 1, j + 1)`. Both are stored row-major with `i` fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        let mut bad = Vec::new();
        if !(h > 0.0 && h.is_finite()) {
            bad.push(format!("grid spacing h = {h} must be positive"));
        }
        if nx < 4 || ny < 4 {
            bad.push(format!("grid needs at least 4 nodes per axis, got {nx} x {ny}"));
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }
        Ok(Grid { nx, ny, h, origin })
    }

    /// Grid covering the box `(-half_width, half_width)^2`.
    pub fn centered(half_width: f64, h: f64) -> Result<Self> {
        if !(half_width > 0.0) || !(h > 0.0) {
            return Err(Error::Validation(vec![format!(
                "box half width {half_width} and spacing {h} must be positive"
            )]));
        }
        let cells = 2.0 * half_width / h;
        let n = cells.round();
        if (cells - n).abs() > 1e-6 {
            return Err(Error::Validation(vec![format!(
                "box width {} is not a whole number of grid spacings h = {h}",
                2.0 * half_width
            )]));
        }
        let n = n as usize + 1;
        Grid::new(n, n, h, [-half_width, -half_width])
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cells_x(&self) -> usize {
        self.nx - 1
    }

    #[inline]
    pub fn cells_y(&self) -> usize {
        self.ny - 1
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        (self.nx - 1) * (self.ny - 1)
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        i + (self.nx - 1) * j
    }

    #[inline]
    pub fn node_ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn cell_ij(&self, k: usize) -> (usize, usize) {
        (k % (self.nx - 1), k / (self.nx - 1))
    }

    #[inline]
    pub fn node_pos(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    /// Upper-right corner of the box.
    pub fn extent(&self) -> [f64; 2] {
        self.node_pos(self.nx - 1, self.ny - 1)
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Same grid translated by a whole number of spacings.
    pub fn shifted(&self, di: i64, dj: i64) -> Grid {
        Grid {
            origin: [
                self.origin[0] + di as f64 * self.h,
                self.origin[1] + dj as f64 * self.h,
            ],
            ..*self
        }
    }

    /// Cell containing `p`, clamped to the grid.
    pub fn locate_cell(&self, p: [f64; 2]) -> (usize, usize) {
        let fx = ((p[0] - self.origin[0]) / self.h).floor();
        let fy = ((p[1] - self.origin[1]) / self.h).floor();
        let i = fx.clamp(0.0, (self.nx - 2) as f64) as usize;
        let j = fy.clamp(0.0, (self.ny - 2) as f64) as usize;
        (i, j)
    }

    pub fn sample_nodes(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.node_count());
        for j in 0..self.ny {
            for i in 0..self.nx {
                let [x, y] = self.node_pos(i, j);
                out.push(f(x, y));
            }
        }
        out
    }

    pub fn sample_cells(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cell_count());
        for j in 0..self.cells_y() {
            for i in 0..self.cells_x() {
                let [x, y] = self.cell_center(i, j);
                out.push(f(x, y));
            }
        }
        out
    }
}
