//! Level-set representation of the cell boundary and its evolution
//!
//! `phi < 0` marks the cell region, `phi > 0` the exterior. The boundary moves
//! with normal velocity `V = (u - u*) - chi * kappa`, which in level-set form
//! reads `phi_t = -(u - u*)|grad phi| + chi (lap phi - N(phi))`. The advection
//! part is explicit (WENO5 one-sided differences inside a Godunov Hamiltonian),
//! the Laplacian implicit, and the remainder `N` explicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, CutCellGeometry, Crossing};
use crate::grid::Grid;
use crate::linalg::{self, CsrMatrix, IncompleteLu, SolveOptions, SolveStats};

/// Default regularization added to `|grad phi|^2` in the curvature remainder.
pub const DEFAULT_EPS_CURV: f64 = 1e-6;
/// Default number of pseudo-time redistancing iterations per step.
pub const DEFAULT_REDISTANCE_ITERS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl LevelSetField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} node values", grid.node_count()),
                found: values.len().to_string(),
            });
        }
        Ok(LevelSetField { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.sample_nodes(f);
        LevelSetField { grid, values }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node(i, j)]
    }

    pub fn geometry(&self) -> CutCellGeometry {
        CutCellGeometry::build(&self.grid, &self.values)
    }

    pub fn crossings(&self) -> Vec<Crossing> {
        geometry::interface_crossings(&self.grid, &self.values)
    }

    pub fn area(&self) -> Result<f64> {
        geometry::region_area(&self.grid, &self.values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetStepConfig {
    pub chi: f64,
    pub u_star: f64,
    pub eps_curv: f64,
    pub dt: f64,
    pub tol: f64,
}

impl LevelSetStepConfig {
    pub fn new(chi: f64, u_star: f64, dt: f64) -> Self {
        LevelSetStepConfig {
            chi,
            u_star,
            eps_curv: DEFAULT_EPS_CURV,
            dt,
            tol: 1e-10,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.chi >= 0.0) {
            out.push(format!("chi = {} must be non-negative", self.chi));
        }
        if !(self.eps_curv > 0.0) {
            out.push(format!("eps_curv = {} must be positive", self.eps_curv));
        }
        if !(self.dt > 0.0) {
            out.push(format!("dt = {} must be positive", self.dt));
        }
        out
    }
}

/// Fifth-order WENO approximation of a one-sided derivative from the five
/// consecutive first differences `v1..v5` of the upwind stencil.
#[inline]
fn weno5(v1: f64, v2: f64, v3: f64, v4: f64, v5: f64) -> f64 {
    let p1 = v1 / 3.0 - 7.0 * v2 / 6.0 + 11.0 * v3 / 6.0;
    let p2 = -v2 / 6.0 + 5.0 * v3 / 6.0 + v4 / 3.0;
    let p3 = v3 / 3.0 + 5.0 * v4 / 6.0 - v5 / 6.0;
    let s1 = 13.0 / 12.0 * (v1 - 2.0 * v2 + v3).powi(2) + 0.25 * (v1 - 4.0 * v2 + 3.0 * v3).powi(2);
    let s2 = 13.0 / 12.0 * (v2 - 2.0 * v3 + v4).powi(2) + 0.25 * (v2 - v4).powi(2);
    let s3 = 13.0 / 12.0 * (v3 - 2.0 * v4 + v5).powi(2) + 0.25 * (3.0 * v3 - 4.0 * v4 + v5).powi(2);
    let vmax = v1 * v1 + v2 * v2 + v3 * v3 + v4 * v4 + v5 * v5;
    let eps = 1e-6 * vmax + 1e-99;
    let a1 = 0.1 / (s1 + eps).powi(2);
    let a2 = 0.6 / (s2 + eps).powi(2);
    let a3 = 0.3 / (s3 + eps).powi(2);
    (a1 * p1 + a2 * p2 + a3 * p3) / (a1 + a2 + a3)
}

/// One-sided derivatives `(D-, D+)` at position `k` of a line of `n` samples.
/// WENO5 where the seven-point stencil fits, first-order differences near the
/// ends, and a zero difference across the box boundary.
#[inline]
fn one_sided(line: impl Fn(usize) -> f64, k: usize, n: usize, h: f64) -> (f64, f64) {
    if k >= 3 && k + 3 < n {
        let d = |a: usize| (line(a + 1) - line(a)) / h;
        let dm = weno5(d(k - 3), d(k - 2), d(k - 1), d(k), d(k + 1));
        let dp = weno5(d(k + 2), d(k + 1), d(k), d(k - 1), d(k - 2));
        (dm, dp)
    } else {
        let dm = if k > 0 { (line(k) - line(k - 1)) / h } else { 0.0 };
        let dp = if k + 1 < n { (line(k + 1) - line(k)) / h } else { 0.0 };
        (dm, dp)
    }
}

/// Godunov flux selection for `phi_t + a |grad phi| = 0` along one axis.
#[inline]
fn godunov_axis(a: f64, dm: f64, dp: f64) -> f64 {
    if a >= 0.0 {
        dm.max(0.0).powi(2).max(dp.min(0.0).powi(2))
    } else {
        dm.min(0.0).powi(2).max(dp.max(0.0).powi(2))
    }
}

/// Upwind `|grad phi|` for the Hamiltonian `a |grad phi|`, where `speed[k]`
/// is the outward normal speed `a` at node `k` (positive expands the region).
pub fn godunov_gradnorm(phi: &LevelSetField, speed: &[f64]) -> Vec<f64> {
    godunov_gradnorm_where(phi, speed, |_| true)
}

/// As [`godunov_gradnorm`], with first-order differences at nodes where
/// `high_order` is false.
fn godunov_gradnorm_where(phi: &LevelSetField, speed: &[f64], high_order: impl Fn(usize) -> bool) -> Vec<f64> {
    let g = &phi.grid;
    let (nx, ny, h) = (g.nx, g.ny, g.h);
    let v = &phi.values;
    let mut out = vec![0.0; g.node_count()];
    for j in 0..ny {
        for i in 0..nx {
            let k = g.node(i, j);
            let (dxm, dxp, dym, dyp) = if high_order(k) {
                let (dxm, dxp) = one_sided(|a| v[g.node(a, j)], i, nx, h);
                let (dym, dyp) = one_sided(|b| v[g.node(i, b)], j, ny, h);
                (dxm, dxp, dym, dyp)
            } else {
                (
                    if i > 0 { (v[k] - v[k - 1]) / h } else { 0.0 },
                    if i + 1 < nx { (v[k + 1] - v[k]) / h } else { 0.0 },
                    if j > 0 { (v[k] - v[k - nx]) / h } else { 0.0 },
                    if j + 1 < ny { (v[k + nx] - v[k]) / h } else { 0.0 },
                )
            };
            let a = speed[k];
            out[k] = (godunov_axis(a, dxm, dxp) + godunov_axis(a, dym, dyp)).sqrt();
        }
    }
    out
}

#[inline]
fn reflect(k: isize, n: usize) -> usize {
    let last = n as isize - 1;
    if k < 0 {
        (-k) as usize
    } else if k > last {
        (2 * last - k) as usize
    } else {
        k as usize
    }
}

/// Central-difference `lap phi` and the regularized remainder
/// `N_eps = (phi_x^2 phi_xx + 2 phi_x phi_y phi_xy + phi_y^2 phi_yy) / (|grad phi|^2 + eps)`,
/// so that `lap phi - N` is the curvature term `kappa |grad phi|`.
/// Box boundaries use mirrored ghost nodes.
pub fn curvature_split(phi: &LevelSetField, eps_curv: f64) -> (Vec<f64>, Vec<f64>) {
    let g = &phi.grid;
    let (nx, ny, h) = (g.nx, g.ny, g.h);
    let v = &phi.values;
    let at = |i: isize, j: isize| v[g.node(reflect(i, nx), reflect(j, ny))];
    let mut lap = vec![0.0; g.node_count()];
    let mut n_eps = vec![0.0; g.node_count()];
    let h2 = h * h;
    for j in 0..ny as isize {
        for i in 0..nx as isize {
            let c = at(i, j);
            let (e, w, n, s) = (at(i + 1, j), at(i - 1, j), at(i, j + 1), at(i, j - 1));
            let px = (e - w) / (2.0 * h);
            let py = (n - s) / (2.0 * h);
            let pxx = (e - 2.0 * c + w) / h2;
            let pyy = (n - 2.0 * c + s) / h2;
            let pxy = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / (4.0 * h2);
            let k = g.node(i as usize, j as usize);
            lap[k] = pxx + pyy;
            n_eps[k] = (px * px * pxx + 2.0 * px * py * pxy + py * py * pyy) / (px * px + py * py + eps_curv);
        }
    }
    (lap, n_eps)
}

/// Implicit part `I - dt chi lap_h` with mirrored Neumann rows at the box
/// boundary, plus its ILU(0) factor. Reused while grid, `dt` and `chi` stay
/// fixed.
#[derive(Debug, Clone)]
pub struct ImplicitCurvatureSystem {
    key: (usize, usize, f64, f64, f64),
    matrix: CsrMatrix,
    ilu: Option<IncompleteLu>,
}

impl ImplicitCurvatureSystem {
    pub fn new(grid: &Grid, dt: f64, chi: f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let c = dt * chi / (grid.h * grid.h);
        let mut t = Vec::with_capacity(5 * grid.node_count());
        for j in 0..ny {
            for i in 0..nx {
                let k = grid.node(i, j);
                t.push((k, k, 1.0 + 4.0 * c));
                if c == 0.0 {
                    continue;
                }
                let mut axis = |idx: usize, n: usize, lo: usize, hi: usize| {
                    if idx == 0 {
                        t.push((k, hi, -2.0 * c));
                    } else if idx == n - 1 {
                        t.push((k, lo, -2.0 * c));
                    } else {
                        t.push((k, lo, -c));
                        t.push((k, hi, -c));
                    }
                };
                axis(i, nx, k.wrapping_sub(1), k + 1);
                axis(j, ny, k.wrapping_sub(nx), k + nx);
            }
        }
        let matrix = CsrMatrix::from_triplets(grid.node_count(), t);
        let ilu = IncompleteLu::new(&matrix);
        ImplicitCurvatureSystem {
            key: (nx, ny, grid.h, dt, chi),
            matrix,
            ilu,
        }
    }

    fn matches(&self, grid: &Grid, dt: f64, chi: f64) -> bool {
        self.key == (grid.nx, grid.ny, grid.h, dt, chi)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

/// Solves `(I - dt chi lap_h) phi_new = phi - dt (u - u*) |grad phi| - dt chi N_eps(phi)`.
pub fn advance(
    phi: &LevelSetField,
    u_ext: &[f64],
    cfg: &LevelSetStepConfig,
) -> Result<(LevelSetField, SolveStats)> {
    let mut cache = None;
    advance_cached(phi, u_ext, cfg, &mut cache)
}

/// [`advance`] reusing the implicit system across calls.
pub fn advance_cached(
    phi: &LevelSetField,
    u_ext: &[f64],
    cfg: &LevelSetStepConfig,
    cache: &mut Option<ImplicitCurvatureSystem>,
) -> Result<(LevelSetField, SolveStats)> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let grid = phi.grid;
    if u_ext.len() != grid.node_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} node speeds", grid.node_count()),
            found: u_ext.len().to_string(),
        });
    }
    let speed: Vec<f64> = u_ext.iter().map(|u| u - cfg.u_star).collect();
    let grad = godunov_gradnorm(phi, &speed);
    let (_, n_eps) = curvature_split(phi, cfg.eps_curv);
    let rhs: Vec<f64> = (0..grid.node_count())
        .map(|k| phi.values[k] - cfg.dt * speed[k] * grad[k] - cfg.dt * cfg.chi * n_eps[k])
        .collect();

    if cfg.chi == 0.0 {
        let stats = SolveStats {
            iterations: 0,
            residual: 0.0,
        };
        return Ok((LevelSetField { grid, values: rhs }, stats));
    }

    if !cache.as_ref().is_some_and(|c| c.matches(&grid, cfg.dt, cfg.chi)) {
        *cache = Some(ImplicitCurvatureSystem::new(&grid, cfg.dt, cfg.chi));
    }
    let sys = cache.as_ref().unwrap();
    let mut x = phi.values.clone();
    let opts = SolveOptions {
        tol: cfg.tol,
        ..Default::default()
    };
    let stats = linalg::solve_nonsymmetric_with(&sys.matrix, sys.ilu.as_ref(), &rhs, &mut x, &opts)?;
    Ok((LevelSetField { grid, values: x }, stats))
}

/// Half-width, in cells, of the band where redistancing uses WENO5.
const WENO_BAND: f64 = 7.5;

/// Gradient error at interface-adjacent nodes that redistancing leaves alone.
pub const REDISTANCE_BAND: f64 = 0.05;

/// Pseudo-time reinitialization `phi_tau = sign(phi0)(1 - |grad phi|)` with
/// Godunov upwinding (WENO5 within `WENO_BAND` cells of the interface, first
/// order beyond), Heun steps of `dtau = h / 2`, and a subcell fix that
/// anchors the zero level set at nodes adjacent to it. An anchored node is
/// divided by its gradient estimate after that estimate has been pulled
/// into `1 ± REDISTANCE_BAND`, so a field that is already close to a signed
/// distance keeps its zero set exactly.
pub fn redistance(phi: &LevelSetField, n_iters: usize) -> LevelSetField {
    let g = phi.grid;
    let (nx, ny, h) = (g.nx, g.ny, g.h);
    let phi0 = geometry::sanitize(&phi.values, h);
    let sign: Vec<f64> = phi0.iter().map(|&p| if p < 0.0 { -1.0 } else { 1.0 }).collect();

    let mut anchor: Vec<Option<f64>> = vec![None; g.node_count()];
    for j in 0..ny {
        for i in 0..nx {
            let k = g.node(i, j);
            let nb = |di: isize, dj: isize| -> Option<f64> {
                let a = i as isize + di;
                let b = j as isize + dj;
                (a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny)
                    .then(|| phi0[g.node(a as usize, b as usize)])
            };
            let (e, w, n, s) = (nb(1, 0), nb(-1, 0), nb(0, 1), nb(0, -1));
            let crosses = [e, w, n, s]
                .iter()
                .flatten()
                .any(|&q| (q < 0.0) != (phi0[k] < 0.0));
            if !crosses {
                continue;
            }
            let c = phi0[k];
            let cx = match (e, w) {
                (Some(e), Some(w)) => 0.5 * (e - w),
                (Some(e), None) => e - c,
                (None, Some(w)) => c - w,
                _ => 0.0,
            };
            let cy = match (n, s) {
                (Some(n), Some(s)) => 0.5 * (n - s),
                (Some(n), None) => n - c,
                (None, Some(s)) => c - s,
                _ => 0.0,
            };
            let mut delta = (cx * cx + cy * cy).sqrt();
            for q in [e, w, n, s].into_iter().flatten() {
                delta = delta.max((q - c).abs());
            }
            let grad = delta / h;
            let grad = if grad > 1.0 + REDISTANCE_BAND {
                grad - REDISTANCE_BAND
            } else if grad < 1.0 - REDISTANCE_BAND {
                grad + REDISTANCE_BAND
            } else {
                1.0
            };
            if grad > 0.0 {
                anchor[k] = Some(c / grad);
            }
        }
    }

    let dtau = 0.5 * h;
    let rate = |values: Vec<f64>| -> (Vec<f64>, Vec<f64>) {
        let field = LevelSetField { grid: g, values };
        let grad = godunov_gradnorm_where(&field, &sign, |k| phi0[k].abs() < WENO_BAND * h);
        let r = (0..g.node_count())
            .map(|k| match anchor[k] {
                Some(d) => -(sign[k] * field.values[k].abs() - d) / h,
                None => -sign[k] * (grad[k] - 1.0),
            })
            .collect();
        (field.values, r)
    };
    let mut cur = phi0.clone();
    for _ in 0..n_iters {
        let (base, r0) = rate(cur);
        let stage: Vec<f64> = base.iter().zip(&r0).map(|(p, r)| p + dtau * r).collect();
        let (stage, r1) = rate(stage);
        cur = base
            .iter()
            .zip(stage.iter().zip(&r1))
            .map(|(p, (q, r))| 0.5 * (p + q + dtau * r))
            .collect();
    }
    LevelSetField {
        grid: g,
        values: cur,
    }
}

/// Initial cell shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Circle { center: [f64; 2], radius: f64 },
    /// Star-shaped curve `r(theta) = sum_k cos_coeffs[k] cos(k theta)` about `center`.
    Polar { center: [f64; 2], cos_coeffs: Vec<f64> },
}

impl ShapeSpec {
    pub fn radius_at(&self, theta: f64) -> f64 {
        match self {
            ShapeSpec::Circle { radius, .. } => *radius,
            ShapeSpec::Polar { cos_coeffs, .. } => cos_coeffs
                .iter()
                .enumerate()
                .map(|(k, a)| a * (k as f64 * theta).cos())
                .sum(),
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match self {
            ShapeSpec::Circle { center, .. } | ShapeSpec::Polar { center, .. } => *center,
        }
    }

    /// Closed polyline sampling of the boundary.
    pub fn boundary(&self, samples: usize) -> Vec<[f64; 2]> {
        let c = self.center();
        (0..samples)
            .map(|m| {
                let th = std::f64::consts::TAU * m as f64 / samples as f64;
                let r = self.radius_at(th);
                [c[0] + r * th.cos(), c[1] + r * th.sin()]
            })
            .collect()
    }

    /// Exact area enclosed by the curve.
    pub fn area(&self) -> f64 {
        match self {
            ShapeSpec::Circle { radius, .. } => std::f64::consts::PI * radius * radius,
            ShapeSpec::Polar { cos_coeffs, .. } => {
                // (1/2) int r^2 dtheta = pi a0^2 + (pi/2) sum_{k>0} a_k^2
                let a0 = cos_coeffs.first().copied().unwrap_or(0.0);
                std::f64::consts::PI * a0 * a0
                    + 0.5 * std::f64::consts::PI * cos_coeffs.iter().skip(1).map(|a| a * a).sum::<f64>()
            }
        }
    }
}

/// Signed distance to the shape (negative inside), followed by redistancing.
pub fn init_shape(grid: &Grid, spec: &ShapeSpec) -> Result<LevelSetField> {
    let c = spec.center();
    let pts = spec.boundary(4096);
    let lo = grid.origin;
    let hi = grid.extent();
    let margin = grid.h;
    let valid = match spec {
        ShapeSpec::Circle { radius, .. } => *radius > 0.0,
        ShapeSpec::Polar { .. } => (0..720).all(|m| spec.radius_at(m as f64 * std::f64::consts::TAU / 720.0) > 0.0),
    };
    if !valid {
        return Err(Error::Validation(vec!["shape radius must be positive".into()]));
    }
    let outside = pts.iter().any(|p| {
        p[0] <= lo[0] + margin || p[0] >= hi[0] - margin || p[1] <= lo[1] + margin || p[1] >= hi[1] - margin
    });
    if outside {
        return Err(Error::ShapeOutsideBox);
    }
    let phi = match spec {
        ShapeSpec::Circle { radius, .. } => {
            LevelSetField::from_fn(*grid, |x, y| ((x - c[0]).powi(2) + (y - c[1]).powi(2)).sqrt() - radius)
        }
        ShapeSpec::Polar { .. } => LevelSetField::from_fn(*grid, |x, y| {
            let d = pts
                .iter()
                .zip(pts.iter().cycle().skip(1))
                .map(|(a, b)| geometry::point_segment_distance([x, y], *a, *b))
                .fold(f64::INFINITY, f64::min);
            let (dx, dy) = (x - c[0], y - c[1]);
            let r = (dx * dx + dy * dy).sqrt();
            let inside = r < spec.radius_at(dy.atan2(dx));
            if inside {
                -d
            } else {
                d
            }
        }),
    };
    Ok(redistance(&phi, DEFAULT_REDISTANCE_ITERS))
}
