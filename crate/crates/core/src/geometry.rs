//! Cut-cell geometry extracted from a node-sampled level-set function.
//!
//! On each grid cell the level-set function is taken piecewise linear over a
//! split into two triangles. Areas average the two diagonal splits; interface
//! segments use the `(i, j)`–`(i+1, j+1)` diagonal. Edge lengths come from
//! the linear interpolant along each edge, which both splits share.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Nodes with `|phi| < ZERO_NODE_EPS * h` are pushed to `+ZERO_NODE_EPS * h`.
pub const ZERO_NODE_EPS: f64 = 1e-12;
/// Cells whose inside area is below `TINY_CELL_FRACTION * h^2` count as outside.
pub const TINY_CELL_FRACTION: f64 = 1e-8;

/// Orientation of a grid edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDir {
    /// From node `(i, j)` to node `(i + 1, j)`.
    X,
    /// From node `(i, j)` to node `(i, j + 1)`.
    Y,
}

/// Point where the linear interpolant of phi vanishes on a grid edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub point: [f64; 2],
    pub dir: EdgeDir,
    /// Start node of the edge.
    pub node: (usize, usize),
    /// Fractional position along the edge measured from `node`.
    pub frac: f64,
}

/// One straight piece of the reconstructed interface inside a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub cell: (usize, usize),
    pub a: [f64; 2],
    pub b: [f64; 2],
}

/// Apply the zero-node policy.
pub fn sanitize(phi: &[f64], h: f64) -> Vec<f64> {
    let eps = ZERO_NODE_EPS * h;
    phi.iter()
        .map(|&p| if p.abs() < eps { eps } else { p })
        .collect()
}

#[inline]
fn sanitize_one(p: f64, h: f64) -> f64 {
    let eps = ZERO_NODE_EPS * h;
    if p.abs() < eps {
        eps
    } else {
        p
    }
}

/// Zero of the linear interpolant between `a` (at 0) and `b` (at 1), if any.
#[inline]
pub fn edge_zero(a: f64, b: f64) -> Option<f64> {
    if (a < 0.0) != (b < 0.0) {
        Some(a / (a - b))
    } else {
        None
    }
}

/// Length of the part of an edge of length `h` where the linear interpolant
/// of its endpoint values is negative.
#[inline]
pub fn edge_length_inside(a: f64, b: f64, h: f64) -> f64 {
    match (a < 0.0, b < 0.0) {
        (true, true) => h,
        (false, false) => 0.0,
        (true, false) => h * (a / (a - b)),
        (false, true) => h * (b / (b - a)),
    }
}

/// Fraction of a triangle where the linear interpolant of the vertex values
/// is negative.
#[inline]
pub fn triangle_negative_fraction(a: f64, b: f64, c: f64) -> f64 {
    let na = a < 0.0;
    let nb = b < 0.0;
    let nc = c < 0.0;
    match (na as u8) + (nb as u8) + (nc as u8) {
        0 => 0.0,
        3 => 1.0,
        1 => {
            let (s, p, q) = if na {
                (a, b, c)
            } else if nb {
                (b, a, c)
            } else {
                (c, a, b)
            };
            s * s / ((s - p) * (s - q))
        }
        _ => {
            let (s, p, q) = if !na {
                (a, b, c)
            } else if !nb {
                (b, a, c)
            } else {
                (c, a, b)
            };
            1.0 - s * s / ((s - p) * (s - q))
        }
    }
}

/// Inside area of one cell from its corner values (lower-left, lower-right,
/// upper-right, upper-left), before the tiny-cell threshold. Mean of the two
/// diagonal splits, so the rule commutes with reflections of the grid.
#[inline]
pub fn raw_cell_area(p00: f64, p10: f64, p11: f64, p01: f64, h: f64) -> f64 {
    let quarter = 0.25 * h * h;
    let main = triangle_negative_fraction(p00, p10, p11) + triangle_negative_fraction(p00, p11, p01);
    let anti = triangle_negative_fraction(p00, p10, p01) + triangle_negative_fraction(p10, p11, p01);
    quarter * (main + anti)
}

/// Inside area of cell `(i, j)`, in `[0, h^2]`, with the zero-node policy and
/// the tiny-cell threshold applied.
pub fn cell_area_fraction(grid: &Grid, phi: &[f64], i: usize, j: usize) -> f64 {
    let h = grid.h;
    let v = |a: usize, b: usize| sanitize_one(phi[grid.node(a, b)], h);
    let area = raw_cell_area(v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1), h);
    if area < TINY_CELL_FRACTION * h * h {
        0.0
    } else {
        area
    }
}

/// All sign-change points on grid edges.
pub fn interface_crossings(grid: &Grid, phi: &[f64]) -> Vec<Crossing> {
    let phi = sanitize(phi, grid.h);
    let mut out = Vec::new();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let a = phi[grid.node(i, j)];
            let p = grid.node_pos(i, j);
            if i + 1 < grid.nx {
                if let Some(t) = edge_zero(a, phi[grid.node(i + 1, j)]) {
                    out.push(Crossing {
                        point: [p[0] + t * grid.h, p[1]],
                        dir: EdgeDir::X,
                        node: (i, j),
                        frac: t,
                    });
                }
            }
            if j + 1 < grid.ny {
                if let Some(t) = edge_zero(a, phi[grid.node(i, j + 1)]) {
                    out.push(Crossing {
                        point: [p[0], p[1] + t * grid.h],
                        dir: EdgeDir::Y,
                        node: (i, j),
                        frac: t,
                    });
                }
            }
        }
    }
    out
}

/// Cut-cell areas, partial edge lengths and interface segments.
#[derive(Debug, Clone)]
pub struct CutCellGeometry {
    pub grid: Grid,
    /// Inside area per cell.
    pub area: Vec<f64>,
    /// Inside length of x-directed edges, indexed `i + (nx - 1) * j`.
    pub edge_x: Vec<f64>,
    /// Inside length of y-directed edges, indexed `i + nx * j`.
    pub edge_y: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl CutCellGeometry {
    pub fn build(grid: &Grid, phi: &[f64]) -> Self {
        assert_eq!(phi.len(), grid.node_count(), "phi must be node-sampled");
        let h = grid.h;
        let phi = sanitize(phi, h);
        let (nx, ny) = (grid.nx, grid.ny);

        let mut edge_x = vec![0.0; (nx - 1) * ny];
        for j in 0..ny {
            for i in 0..nx - 1 {
                edge_x[i + (nx - 1) * j] =
                    edge_length_inside(phi[grid.node(i, j)], phi[grid.node(i + 1, j)], h);
            }
        }
        let mut edge_y = vec![0.0; nx * (ny - 1)];
        for j in 0..ny - 1 {
            for i in 0..nx {
                edge_y[i + nx * j] =
                    edge_length_inside(phi[grid.node(i, j)], phi[grid.node(i, j + 1)], h);
            }
        }

        let tiny = TINY_CELL_FRACTION * h * h;
        let mut area = vec![0.0; grid.cell_count()];
        let mut segments = Vec::new();
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let p00 = phi[grid.node(i, j)];
                let p10 = phi[grid.node(i + 1, j)];
                let p11 = phi[grid.node(i + 1, j + 1)];
                let p01 = phi[grid.node(i, j + 1)];
                let a = raw_cell_area(p00, p10, p11, p01, h);
                area[grid.cell(i, j)] = if a < tiny { 0.0 } else { a };

                let any_neg = p00 < 0.0 || p10 < 0.0 || p11 < 0.0 || p01 < 0.0;
                let all_neg = p00 < 0.0 && p10 < 0.0 && p11 < 0.0 && p01 < 0.0;
                if any_neg && !all_neg {
                    let x00 = grid.node_pos(i, j);
                    let x10 = grid.node_pos(i + 1, j);
                    let x11 = grid.node_pos(i + 1, j + 1);
                    let x01 = grid.node_pos(i, j + 1);
                    for tri in [[(x00, p00), (x10, p10), (x11, p11)], [(x00, p00), (x11, p11), (x01, p01)]] {
                        if let Some((a, b)) = triangle_segment(&tri) {
                            segments.push(Segment { cell: (i, j), a, b });
                        }
                    }
                }
            }
        }

        CutCellGeometry {
            grid: *grid,
            area,
            edge_x,
            edge_y,
            segments,
        }
    }

    #[inline]
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.area[self.grid.cell(i, j)] > 0.0
    }

    pub fn active_count(&self) -> usize {
        self.area.iter().filter(|&&a| a > 0.0).count()
    }

    /// Inside lengths of the (bottom, top, left, right) edges of cell `(i, j)`.
    #[inline]
    pub fn cell_edges(&self, i: usize, j: usize) -> [f64; 4] {
        let nx = self.grid.nx;
        [
            self.edge_x[i + (nx - 1) * j],
            self.edge_x[i + (nx - 1) * (j + 1)],
            self.edge_y[i + nx * j],
            self.edge_y[i + 1 + nx * j],
        ]
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }

    /// Area-weighted mean of cell centers.
    pub fn centroid(&self) -> Option<[f64; 2]> {
        let total = self.total_area();
        if total <= 0.0 {
            return None;
        }
        let (mut sx, mut sy) = (0.0, 0.0);
        for (k, &a) in self.area.iter().enumerate() {
            if a > 0.0 {
                let (i, j) = self.grid.cell_ij(k);
                let [x, y] = self.grid.cell_center(i, j);
                sx += a * x;
                sy += a * y;
            }
        }
        Some([sx / total, sy / total])
    }

    /// Endpoints of all interface segments (each crossing appears at least once).
    pub fn interface_points(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(2 * self.segments.len());
        for s in &self.segments {
            pts.push(s.a);
            pts.push(s.b);
        }
        pts
    }
}

fn triangle_segment(tri: &[([f64; 2], f64); 3]) -> Option<([f64; 2], [f64; 2])> {
    let mut pts = [[0.0; 2]; 2];
    let mut n = 0;
    for k in 0..3 {
        let (pa, a) = tri[k];
        let (pb, b) = tri[(k + 1) % 3];
        if let Some(t) = edge_zero(a, b) {
            if n < 2 {
                pts[n] = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            }
            n += 1;
        }
    }
    (n == 2).then_some((pts[0], pts[1]))
}

/// Total inside area. Fails when the region reaches the box boundary.
pub fn region_area(grid: &Grid, phi: &[f64]) -> Result<f64> {
    if touches_boundary(grid, phi) {
        return Err(Error::RegionTouchesBoundary);
    }
    Ok(CutCellGeometry::build(grid, phi).total_area())
}

/// Whether any boundary node lies inside the region.
pub fn touches_boundary(grid: &Grid, phi: &[f64]) -> bool {
    let h = grid.h;
    let neg = |i: usize, j: usize| sanitize_one(phi[grid.node(i, j)], h) < 0.0;
    (0..grid.nx).any(|i| neg(i, 0) || neg(i, grid.ny - 1))
        || (0..grid.ny).any(|j| neg(0, j) || neg(grid.nx - 1, j))
}

/// Midpoint-value times partial-area quadrature of a cell-centered field.
/// Cells outside the region may hold any value (conventionally NaN).
pub fn integrate_cell_region(field: &[f64], geom: &CutCellGeometry) -> Result<f64> {
    if field.len() != geom.area.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} cell values", geom.area.len()),
            found: format!("{}", field.len()),
        });
    }
    let mut sum = 0.0;
    for (k, (&f, &a)) in field.iter().zip(&geom.area).enumerate() {
        if a > 0.0 {
            if !f.is_finite() {
                let (i, j) = geom.grid.cell_ij(k);
                return Err(Error::MissingValue { i, j });
            }
            sum += f * a;
        }
    }
    Ok(sum)
}

/// Point-to-polyline Hausdorff distance between two reconstructed interfaces.
pub fn hausdorff(a: &CutCellGeometry, b: &CutCellGeometry) -> f64 {
    hausdorff_segments(&a.segments, &b.segments)
}

/// [`hausdorff`] on bare segment lists, which may come from different grids.
pub fn hausdorff_segments(a: &[Segment], b: &[Segment]) -> f64 {
    fn directed(pts: &[[f64; 2]], segs: &[Segment]) -> f64 {
        pts.iter()
            .map(|&p| {
                segs.iter()
                    .map(|s| point_segment_distance(p, s.a, s.b))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }
    if a.is_empty() || b.is_empty() {
        return if a.is_empty() && b.is_empty() { 0.0 } else { f64::INFINITY };
    }
    let ends = |s: &[Segment]| s.iter().flat_map(|s| [s.a, s.b]).collect::<Vec<_>>();
    directed(&ends(a), b).max(directed(&ends(b), a))
}

pub fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0], a[1] + t * d[1]];
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk(grid: &Grid, cx: f64, cy: f64, r: f64) -> Vec<f64> {
        grid.sample_nodes(|x, y| ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() - r)
    }

    #[test]
    fn crossing_positions() {
        assert_eq!(edge_zero(-1.0, 1.0), Some(0.5));
        assert_eq!(edge_zero(-1.0, 3.0), Some(0.25));
        assert_eq!(edge_zero(-1.0, -2.0), None);

        let g = Grid::new(4, 4, 1.0, [0.0, 0.0]).unwrap();
        // phi = x - 1.25 crosses every x-edge between nodes 1 and 2
        let phi = g.sample_nodes(|x, _| x - 1.25);
        let c = interface_crossings(&g, &phi);
        assert_eq!(c.len(), 4);
        for cr in c {
            assert_eq!(cr.dir, EdgeDir::X);
            assert!((cr.point[0] - 1.25).abs() < 1e-15);
        }
    }

    #[test]
    fn edge_lengths() {
        assert_eq!(edge_length_inside(-1.0, -1.0, 0.1), 0.1);
        assert_eq!(edge_length_inside(1.0, 1.0, 0.1), 0.0);
        assert!((edge_length_inside(-1.0, 1.0, 0.1) - 0.05).abs() < 1e-17);
        assert!((edge_length_inside(3.0, -1.0, 1.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn cell_area_cases() {
        let g = Grid::new(4, 4, 0.2, [0.0, 0.0]).unwrap();
        let inside = vec![-1.0; g.node_count()];
        let outside = vec![1.0; g.node_count()];
        assert!((cell_area_fraction(&g, &inside, 1, 1) - 0.04).abs() < 1e-15);
        assert_eq!(cell_area_fraction(&g, &outside, 1, 1), 0.0);
        // zero line through the center of cell (1, 1)
        let phi = g.sample_nodes(|x, _| x - 0.3);
        let a = cell_area_fraction(&g, &phi, 1, 1);
        assert!((a - 0.02).abs() < 1e-15, "{a}");
    }

    #[test]
    fn triangle_fraction_continuous_across_sign_change() {
        let eps = 1e-13;
        let below = triangle_negative_fraction(-1.0, -eps, 2.0);
        let above = triangle_negative_fraction(-1.0, eps, 2.0);
        assert!((below - above).abs() < 1e-12);
        assert!((above - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn disk_area_and_first_moment() {
        let g = Grid::centered(3.0, 0.06).unwrap();
        let phi = disk(&g, 0.0, 0.0, 1.3);
        let geom = CutCellGeometry::build(&g, &phi);
        let exact = std::f64::consts::PI * 1.69;
        let area = region_area(&g, &phi).unwrap();
        assert!((area - exact).abs() < 0.5 * g.h * g.h * 10.0, "{area} vs {exact}");
        assert_eq!(area, geom.total_area());
        let ones = vec![1.0; g.cell_count()];
        assert_eq!(integrate_cell_region(&ones, &geom).unwrap(), area);
        let xs = g.sample_cells(|x, _| x);
        assert!(integrate_cell_region(&xs, &geom).unwrap().abs() < g.h * g.h);
    }

    #[test]
    fn missing_value_is_reported() {
        let g = Grid::centered(1.0, 0.1).unwrap();
        let phi = disk(&g, 0.0, 0.0, 0.5);
        let geom = CutCellGeometry::build(&g, &phi);
        let mut f = vec![1.0; g.cell_count()];
        let k = geom.area.iter().position(|&a| a > 0.0).unwrap();
        f[k] = f64::NAN;
        assert!(matches!(
            integrate_cell_region(&f, &geom),
            Err(Error::MissingValue { .. })
        ));
    }

    #[test]
    fn full_box_integral() {
        let g = Grid::centered(1.0, 0.1).unwrap();
        let phi = vec![-1.0; g.node_count()];
        let geom = CutCellGeometry::build(&g, &phi);
        let f = vec![2.5; g.cell_count()];
        assert!((integrate_cell_region(&f, &geom).unwrap() - 10.0).abs() < 1e-12);
        assert!(matches!(region_area(&g, &phi), Err(Error::RegionTouchesBoundary)));
        let empty = vec![1.0; g.node_count()];
        assert_eq!(region_area(&g, &empty).unwrap(), 0.0);
    }

    #[test]
    fn zero_nodes_are_perturbed_outward() {
        let g = Grid::new(4, 4, 1.0, [0.0, 0.0]).unwrap();
        let mut phi = vec![-1.0; g.node_count()];
        phi[g.node(1, 1)] = 0.0;
        let s = sanitize(&phi, g.h);
        assert!(s[g.node(1, 1)] > 0.0);
    }

    #[test]
    fn hausdorff_of_concentric_circles() {
        let g = Grid::centered(2.0, 0.05).unwrap();
        let a = CutCellGeometry::build(&g, &disk(&g, 0.0, 0.0, 1.0));
        let b = CutCellGeometry::build(&g, &disk(&g, 0.0, 0.0, 1.1));
        let d = hausdorff(&a, &b);
        assert!((d - 0.1).abs() < 0.01, "{d}");
        assert!(hausdorff(&a, &a) < 1e-12);
    }
}
