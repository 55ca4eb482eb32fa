//! Interface sampling of a cell-centered field and its constant-normal
//! extension to every node of the box.

use crate::error::{Error, Result};
use crate::geometry::{interface_crossings, sanitize, Crossing};
use crate::grid::Grid;
use crate::levelset::LevelSetField;
use crate::lsfit::{reconstruct, FitKind};

pub const SWEEP_TOL: f64 = 1e-8;
pub const MAX_PASSES: usize = 8;

/// Field value reconstructed at one interface crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSample {
    pub crossing: Crossing,
    pub value: f64,
    pub kind: FitKind,
}

/// Reconstruct `u` (cell-centered, non-finite outside the region) at every
/// interface crossing from valid cells within two cells of the crossing.
pub fn sample_on_interface(u: &[f64], phi: &LevelSetField) -> Result<Vec<InterfaceSample>> {
    let grid = &phi.grid;
    check_cells(grid, u)?;
    let crossings = interface_crossings(grid, &phi.values);
    let mut out = Vec::with_capacity(crossings.len());
    let mut stencil = Vec::with_capacity(16);
    for c in crossings {
        gather_window(grid, u, c.point, 2.0, &mut stencil);
        let (value, kind) = reconstruct(&stencil, c.point, grid.h).ok_or(Error::NoInteriorData {
            x: c.point[0],
            y: c.point[1],
        })?;
        out.push(InterfaceSample { crossing: c, value, kind });
    }
    Ok(out)
}

/// Valid cells whose centers lie within `reach * h` of `p` in both axes.
fn gather_window(grid: &Grid, u: &[f64], p: [f64; 2], reach: f64, out: &mut Vec<([f64; 2], f64)>) {
    out.clear();
    let h = grid.h;
    let fx = (p[0] - grid.origin[0]) / h - 0.5;
    let fy = (p[1] - grid.origin[1]) / h - 0.5;
    let lo = |f: f64| (f - reach - 1e-9).ceil().max(0.0) as usize;
    let hi = |f: f64, n: usize| ((f + reach + 1e-9).floor().max(-1.0) as i64).min(n as i64 - 1);
    let (i1, j1) = (hi(fx, grid.cells_x()), hi(fy, grid.cells_y()));
    if i1 < 0 || j1 < 0 {
        return;
    }
    for j in lo(fy)..=j1 as usize {
        for i in lo(fx)..=i1 as usize {
            let val = u[grid.cell(i, j)];
            if val.is_finite() {
                out.push((grid.cell_center(i, j), val));
            }
        }
    }
}

fn check_cells(grid: &Grid, u: &[f64]) -> Result<()> {
    if u.len() != grid.cell_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} cell values", grid.cell_count()),
            found: u.len().to_string(),
        });
    }
    Ok(())
}

/// Node field produced by the extension.
#[derive(Debug, Clone, PartialEq)]
pub struct Extension {
    pub values: Vec<f64>,
    /// Full passes of four sweeps performed.
    pub passes: usize,
    /// Whether the last pass changed no node by more than [`SWEEP_TOL`].
    pub converged: bool,
}

/// Extend `u` from the interior to the whole box: inside nodes average the
/// surrounding valid cells, outside nodes carry the interface value constant
/// along the normal.
pub fn extend_constant_normal(
    samples: &[InterfaceSample],
    u: &[f64],
    phi: &LevelSetField,
) -> Result<Extension> {
    extend_from(samples, u, phi, None)
}

/// As [`extend_constant_normal`], starting the sweeps from `guess` at the
/// free nodes.
pub fn extend_from(
    samples: &[InterfaceSample],
    u: &[f64],
    phi: &LevelSetField,
    guess: Option<&[f64]>,
) -> Result<Extension> {
    let grid = &phi.grid;
    check_cells(grid, u)?;
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.h;
    let p = sanitize(&phi.values, h);
    let n = grid.node_count();
    let mut val = vec![f64::NAN; n];
    let mut fixed = vec![false; n];

    for j in 0..ny {
        for i in 0..nx {
            let k = grid.node(i, j);
            if p[k] < 0.0 {
                if let Some(a) = node_average(grid, u, i, j) {
                    val[k] = a;
                    fixed[k] = true;
                }
            }
        }
    }

    // outside nodes next to the interface take the sample closest to their
    // foot point on the zero level set
    if !samples.is_empty() {
        let buckets = Buckets::new(grid, samples);
        for j in 0..ny {
            for i in 0..nx {
                let k = grid.node(i, j);
                if fixed[k] || !near_interface(grid, &p, i, j) {
                    continue;
                }
                let x = grid.node_pos(i, j);
                let g = central_gradient(grid, &p, i, j);
                let gn = (g[0] * g[0] + g[1] * g[1]).sqrt();
                let foot = if gn > 1e-12 {
                    [x[0] - p[k] * g[0] / gn, x[1] - p[k] * g[1] / gn]
                } else {
                    x
                };
                if let Some(v) = buckets.interpolate(grid, samples, foot) {
                    val[k] = v;
                    fixed[k] = true;
                }
            }
        }
    }

    if let Some(g) = guess {
        if g.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} node values"),
                found: g.len().to_string(),
            });
        }
        for k in 0..n {
            if !fixed[k] && g[k].is_finite() {
                val[k] = g[k];
            }
        }
    }

    let orders: [(bool, bool); 4] = [(false, false), (true, false), (true, true), (false, true)];
    let mut passes = 0;
    let mut converged = false;
    while passes < MAX_PASSES {
        passes += 1;
        let mut change: f64 = 0.0;
        for &(rev_i, rev_j) in &orders {
            for jj in 0..ny {
                let j = if rev_j { ny - 1 - jj } else { jj };
                for ii in 0..nx {
                    let i = if rev_i { nx - 1 - ii } else { ii };
                    let k = grid.node(i, j);
                    if fixed[k] {
                        continue;
                    }
                    if let Some(new) = upwind_update(grid, &p, &val, i, j) {
                        let d = if val[k].is_finite() { (new - val[k]).abs() } else { f64::INFINITY };
                        change = change.max(d);
                        val[k] = new;
                    }
                }
            }
        }
        if change < SWEEP_TOL {
            converged = true;
            break;
        }
    }

    // nodes with no upwind path (only possible for degenerate phi)
    if val.iter().any(|v| !v.is_finite()) {
        let known: Vec<f64> = val.iter().copied().filter(|v| v.is_finite()).collect();
        let fill = if known.is_empty() {
            samples.iter().map(|s| s.value).sum::<f64>() / samples.len().max(1) as f64
        } else {
            known.iter().sum::<f64>() / known.len() as f64
        };
        for v in val.iter_mut().filter(|v| !v.is_finite()) {
            *v = fill;
        }
    }

    Ok(Extension {
        values: val,
        passes,
        converged,
    })
}

/// Mean of the valid cell values around node `(i, j)`; on a uniform grid
/// this is the bilinear interpolant at the shared corner.
fn node_average(grid: &Grid, u: &[f64], i: usize, j: usize) -> Option<f64> {
    let (mut s, mut c) = (0.0, 0);
    for dj in 0..2 {
        for di in 0..2 {
            if i + di == 0 || j + dj == 0 {
                continue;
            }
            let (ci, cj) = (i + di - 1, j + dj - 1);
            if ci >= grid.cells_x() || cj >= grid.cells_y() {
                continue;
            }
            let v = u[grid.cell(ci, cj)];
            if v.is_finite() {
                s += v;
                c += 1;
            }
        }
    }
    (c > 0).then(|| s / c as f64)
}

fn near_interface(grid: &Grid, p: &[f64], i: usize, j: usize) -> bool {
    let s = p[grid.node(i, j)] < 0.0;
    let nb = [
        (i.wrapping_sub(1), j),
        (i + 1, j),
        (i, j.wrapping_sub(1)),
        (i, j + 1),
    ];
    nb.iter()
        .any(|&(a, b)| a < grid.nx && b < grid.ny && (p[grid.node(a, b)] < 0.0) != s)
}

fn central_gradient(grid: &Grid, p: &[f64], i: usize, j: usize) -> [f64; 2] {
    let h = grid.h;
    let d = |lo: usize, hi: usize, span: f64| (p[hi] - p[lo]) / (span * h);
    let gx = match (i > 0, i + 1 < grid.nx) {
        (true, true) => d(grid.node(i - 1, j), grid.node(i + 1, j), 2.0),
        (false, _) => d(grid.node(i, j), grid.node(i + 1, j), 1.0),
        (_, false) => d(grid.node(i - 1, j), grid.node(i, j), 1.0),
    };
    let gy = match (j > 0, j + 1 < grid.ny) {
        (true, true) => d(grid.node(i, j - 1), grid.node(i, j + 1), 2.0),
        (false, _) => d(grid.node(i, j), grid.node(i, j + 1), 1.0),
        (_, false) => d(grid.node(i, j - 1), grid.node(i, j), 1.0),
    };
    [gx, gy]
}

/// Upwind value at node `(i, j)` from the neighbors with smaller phi.
fn upwind_update(grid: &Grid, p: &[f64], val: &[f64], i: usize, j: usize) -> Option<f64> {
    let k = grid.node(i, j);
    let pick = |a: Option<usize>, b: Option<usize>| -> Option<usize> {
        let cand = [a, b]
            .into_iter()
            .flatten()
            .filter(|&m| val[m].is_finite() && p[m] < p[k]);
        cand.min_by(|&x, &y| p[x].total_cmp(&p[y]))
    };
    let xn = pick(
        (i > 0).then(|| grid.node(i - 1, j)),
        (i + 1 < grid.nx).then(|| grid.node(i + 1, j)),
    );
    let yn = pick(
        (j > 0).then(|| grid.node(i, j - 1)),
        (j + 1 < grid.ny).then(|| grid.node(i, j + 1)),
    );
    let a = xn.map_or(0.0, |m| p[k] - p[m]);
    let b = yn.map_or(0.0, |m| p[k] - p[m]);
    if a + b <= 0.0 {
        return None;
    }
    let ua = xn.map_or(0.0, |m| val[m]);
    let ub = yn.map_or(0.0, |m| val[m]);
    Some((a * ua + b * ub) / (a + b))
}

/// Samples bucketed by containing cell for nearest-point queries.
struct Buckets {
    start: Vec<usize>,
    items: Vec<usize>,
}

impl Buckets {
    fn new(grid: &Grid, samples: &[InterfaceSample]) -> Self {
        let nc = grid.cell_count();
        let cell_of: Vec<usize> = samples
            .iter()
            .map(|s| {
                let (i, j) = grid.locate_cell(s.crossing.point);
                grid.cell(i, j)
            })
            .collect();
        let mut start = vec![0usize; nc + 1];
        for &c in &cell_of {
            start[c + 1] += 1;
        }
        for c in 0..nc {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut items = vec![0; samples.len()];
        for (s, &c) in cell_of.iter().enumerate() {
            items[fill[c]] = s;
            fill[c] += 1;
        }
        Buckets { start, items }
    }

    /// Value at `p` interpolated along the chord between the two nearest
    /// samples when `p` projects inside it, else the nearest sample.
    fn interpolate(&self, grid: &Grid, samples: &[InterfaceSample], p: [f64; 2]) -> Option<f64> {
        let [a, b] = self.nearest_two(grid, samples, p);
        let a = &samples[a?];
        let Some(b) = b.map(|b| &samples[b]) else {
            return Some(a.value);
        };
        let (qa, qb) = (a.crossing.point, b.crossing.point);
        let d = [qb[0] - qa[0], qb[1] - qa[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        if len2 <= 0.0 {
            return Some(a.value);
        }
        let s = ((p[0] - qa[0]) * d[0] + (p[1] - qa[1]) * d[1]) / len2;
        if (0.0..=1.0).contains(&s) {
            Some(a.value + s * (b.value - a.value))
        } else {
            Some(a.value)
        }
    }

    fn nearest_two(&self, grid: &Grid, samples: &[InterfaceSample], p: [f64; 2]) -> [Option<usize>; 2] {
        let (ci, cj) = grid.locate_cell(p);
        let mut radius = 1usize;
        loop {
            let i0 = ci.saturating_sub(radius);
            let j0 = cj.saturating_sub(radius);
            let i1 = (ci + radius).min(grid.cells_x() - 1);
            let j1 = (cj + radius).min(grid.cells_y() - 1);
            let mut best: [Option<(f64, usize)>; 2] = [None, None];
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let c = grid.cell(i, j);
                    for &s in &self.items[self.start[c]..self.start[c + 1]] {
                        let q = samples[s].crossing.point;
                        let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                        if best[0].map_or(true, |(bd, _)| d < bd) {
                            best[1] = best[0];
                            best[0] = Some((d, s));
                        } else if best[1].map_or(true, |(bd, _)| d < bd) {
                            best[1] = Some((d, s));
                        }
                    }
                }
            }
            let covers_all = i0 == 0 && j0 == 0 && i1 + 1 == grid.cells_x() && j1 + 1 == grid.cells_y();
            let reach = radius as f64 * grid.h;
            if covers_all || best[1].is_some_and(|(d, _)| d.sqrt() <= reach) {
                return best.map(|b| b.map(|(_, s)| s));
            }
            radius *= 2;
        }
    }
}

/// Sample and extend in one call.
pub fn extend_velocity(u: &[f64], phi: &LevelSetField) -> Result<Extension> {
    let samples = sample_on_interface(u, phi)?;
    extend_constant_normal(&samples, u, phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CutCellGeometry;

    fn disk(r: f64, l: f64, h: f64) -> LevelSetField {
        let g = Grid::centered(l, h).unwrap();
        LevelSetField::from_fn(g, |x, y| (x * x + y * y).sqrt() - r)
    }

    fn inside_field(phi: &LevelSetField, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let geom = CutCellGeometry::build(&phi.grid, &phi.values);
        let g = phi.grid;
        (0..g.cell_count())
            .map(|k| {
                let (i, j) = g.cell_ij(k);
                let c = g.cell_center(i, j);
                if geom.area[k] > 0.0 {
                    f(c[0], c[1])
                } else {
                    f64::NAN
                }
            })
            .collect()
    }

    #[test]
    fn constant_is_reproduced_everywhere() {
        let phi = disk(1.0, 2.0, 0.1);
        let u = inside_field(&phi, |_, _| 5.0);
        let s = sample_on_interface(&u, &phi).unwrap();
        assert!(!s.is_empty());
        assert!(s.iter().all(|x| x.value == 5.0));
        let e = extend_constant_normal(&s, &u, &phi).unwrap();
        assert!(e.converged);
        assert!(e.values.iter().all(|&v| v == 5.0));
    }

    #[test]
    fn linear_field_sampled_at_crossings() {
        let phi = disk(1.0, 2.0, 0.05);
        let u = inside_field(&phi, |x, _| x);
        let s = sample_on_interface(&u, &phi).unwrap();
        let err = s
            .iter()
            .map(|x| (x.value - x.crossing.point[0]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn isolated_cell_falls_back_to_nearest() {
        let g = Grid::centered(1.0, 0.1).unwrap();
        let c = g.cell_center(10, 10);
        let phi = LevelSetField::from_fn(g, |x, y| (x - c[0]).abs().max((y - c[1]).abs()) - 0.04);
        let mut u = vec![f64::NAN; g.cell_count()];
        u[g.cell(10, 10)] = 3.25;
        let s = sample_on_interface(&u, &phi).unwrap();
        assert!(s.iter().all(|x| x.value == 3.25 && x.kind == FitKind::Nearest));
    }

    #[test]
    fn missing_interior_data_is_an_error() {
        let phi = disk(1.0, 2.0, 0.1);
        let u = vec![f64::NAN; phi.grid.cell_count()];
        assert!(matches!(sample_on_interface(&u, &phi), Err(Error::NoInteriorData { .. })));
    }

    #[test]
    fn radial_characteristics() {
        let r = 1.0;
        let phi = disk(r, 3.0, 0.05);
        let g = |x: f64, y: f64| (2.0 * y.atan2(x)).cos();
        let u = inside_field(&phi, |x, y| g(x, y));
        let e = extend_velocity(&u, &phi).unwrap();
        let grid = phi.grid;
        let mut worst: f64 = 0.0;
        for k in 0..grid.node_count() {
            let (i, j) = grid.node_ij(k);
            let [x, y] = grid.node_pos(i, j);
            let rr = (x * x + y * y).sqrt();
            if rr > r + 0.05 && rr < 2.5 {
                worst = worst.max((e.values[k] - g(x, y)).abs());
            }
        }
        assert!(worst < 0.15, "{worst}");
    }

    #[test]
    fn idempotent_on_extended_field() {
        let phi = disk(1.0, 2.0, 0.05);
        let u = inside_field(&phi, |x, y| x * x - y);
        let s = sample_on_interface(&u, &phi).unwrap();
        let e1 = extend_constant_normal(&s, &u, &phi).unwrap();
        let e2 = extend_from(&s, &u, &phi, Some(&e1.values)).unwrap();
        let d = e1.values.iter().zip(&e2.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d < 1e-6, "{d}");
        assert!(e2.passes <= e1.passes);
    }
}
