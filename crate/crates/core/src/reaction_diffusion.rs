//! Cut-cell finite-volume reaction-diffusion on the moving cell region.
//!
//! Concentrations live at cell centers and are `NaN` on cells outside the
//! region. Diffusion is implicit with zero flux through the interface;
//! kinetics and stimulus are explicit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::CutCellGeometry;
use crate::kinetics::{reaction_f, stimulus, Params, StimulusConfig};
use crate::linalg::{solve_spd_with, CsrMatrix, SolveOptions, SolveStats, SymmetricPreconditioner};
use crate::lsfit::reconstruct;

/// Default relative residual for the concentration solves.
pub const DIFFUSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    #[default]
    TwoSpecies,
    /// `v` replaced by its spatial mean, fixed by mass conservation.
    OneSpecies,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Total protein `M`.
    pub mass: f64,
}

impl ConcentrationState {
    /// Fields sampled at centers of active cells.
    pub fn from_fns(
        geom: &CutCellGeometry,
        mass: f64,
        fu: impl Fn(f64, f64) -> f64,
        fv: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let g = &geom.grid;
        let mut u = vec![f64::NAN; g.cell_count()];
        let mut v = vec![f64::NAN; g.cell_count()];
        for k in 0..g.cell_count() {
            if geom.area[k] > 0.0 {
                let (i, j) = g.cell_ij(k);
                let [x, y] = g.cell_center(i, j);
                u[k] = fu(x, y);
                v[k] = fv(x, y);
            }
        }
        ConcentrationState { u, v, mass }
    }

    /// `(U, V) = (∫u, ∫v)` over the region.
    pub fn totals(&self, geom: &CutCellGeometry) -> Result<(f64, f64)> {
        Ok((
            crate::geometry::integrate_cell_region(&self.u, geom)?,
            crate::geometry::integrate_cell_region(&self.v, geom)?,
        ))
    }
}

/// Carry `field` from the old region to the new one: surviving cells keep
/// their values, newly covered cells are extrapolated from previously valid
/// cells in the surrounding 5x5 block, and cells that left are dropped.
pub fn extend_field(field: &[f64], new_geom: &CutCellGeometry) -> Result<Vec<f64>> {
    let g = &new_geom.grid;
    if field.len() != g.cell_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} cell values", g.cell_count()),
            found: field.len().to_string(),
        });
    }
    let mut out = vec![f64::NAN; field.len()];
    let mut stencil = Vec::with_capacity(25);
    for k in 0..field.len() {
        if new_geom.area[k] <= 0.0 {
            continue;
        }
        if field[k].is_finite() {
            out[k] = field[k];
            continue;
        }
        let (i, j) = g.cell_ij(k);
        stencil.clear();
        for cj in j.saturating_sub(2)..=(j + 2).min(g.cells_y() - 1) {
            for ci in i.saturating_sub(2)..=(i + 2).min(g.cells_x() - 1) {
                let val = field[g.cell(ci, cj)];
                if val.is_finite() {
                    stencil.push((g.cell_center(ci, cj), val));
                }
            }
        }
        let (val, _) = reconstruct(&stencil, g.cell_center(i, j), g.h).ok_or(Error::IsolatedNewCell { i, j })?;
        out[k] = val;
    }
    Ok(out)
}

/// Extend both species onto the new region.
pub fn extend_to_new_region(state: &ConcentrationState, new_geom: &CutCellGeometry) -> Result<ConcentrationState> {
    Ok(ConcentrationState {
        u: extend_field(&state.u, new_geom)?,
        v: extend_field(&state.v, new_geom)?,
        mass: state.mass,
    })
}

/// Shift `v` uniformly so that `∫(u + v) = M`. Returns the shift.
pub fn mass_correct(state: &mut ConcentrationState, geom: &CutCellGeometry) -> Result<f64> {
    let area = geom.total_area();
    if !(area > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let (uu, vv) = state.totals(geom)?;
    let shift = (state.mass - (uu + vv)) / area;
    for (k, v) in state.v.iter_mut().enumerate() {
        if geom.area[k] > 0.0 {
            *v += shift;
        }
    }
    Ok(shift)
}

/// `(area/dt) I + D G` on the active cells, where `G` is the cut-cell
/// flux operator.
#[derive(Debug, Clone)]
pub struct DiffusionSystem {
    pub matrix: CsrMatrix,
    /// Grid cell index of each unknown.
    pub cells: Vec<usize>,
    /// Unknown index of each grid cell, `usize::MAX` when inactive.
    pub index: Vec<usize>,
    pub area: Vec<f64>,
    pub dt: f64,
    pre: SymmetricPreconditioner,
}

pub fn assemble_diffusion_system(geom: &CutCellGeometry, d: f64, dt: f64) -> Result<DiffusionSystem> {
    let g = &geom.grid;
    let h = g.h;
    let mut index = vec![usize::MAX; g.cell_count()];
    let mut cells = Vec::new();
    for (k, &a) in geom.area.iter().enumerate() {
        if a > 0.0 {
            index[k] = cells.len();
            cells.push(k);
        }
    }
    let n = cells.len();
    let mut trip = Vec::with_capacity(5 * n);
    let area: Vec<f64> = cells.iter().map(|&k| geom.area[k]).collect();
    for (r, &k) in cells.iter().enumerate() {
        let (i, j) = g.cell_ij(k);
        let [bottom, top, left, right] = geom.cell_edges(i, j);
        let nbrs = [
            (j > 0, bottom, i, j.wrapping_sub(1)),
            (j + 1 < g.cells_y(), top, i, j + 1),
            (i > 0, left, i.wrapping_sub(1), j),
            (i + 1 < g.cells_x(), right, i + 1, j),
        ];
        let mut diag = area[r] / dt;
        let mut linked = false;
        for (exists, len, ni, nj) in nbrs {
            if !exists || len <= 0.0 {
                continue;
            }
            let c = index[g.cell(ni, nj)];
            if c == usize::MAX {
                continue;
            }
            let w = d * len / h;
            diag += w;
            trip.push((r, c, -w));
            linked = true;
        }
        if !linked && n > 1 {
            return Err(Error::DisconnectedCell { i, j });
        }
        trip.push((r, r, diag));
    }
    let matrix = CsrMatrix::from_triplets(n, trip);
    let pre = SymmetricPreconditioner::incomplete_cholesky(&matrix);
    Ok(DiffusionSystem {
        matrix,
        cells,
        index,
        area,
        dt,
        pre,
    })
}

impl DiffusionSystem {
    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    /// Exact symmetry, positive diagonal and strict diagonal dominance; the
    /// three together imply positive definiteness.
    pub fn spd_certificate(&self) -> bool {
        let a = &self.matrix;
        a.is_symmetric()
            && (0..a.dim()).all(|r| {
                let mut diag = 0.0;
                let mut off = 0.0;
                for (c, v) in a.row(r) {
                    if c == r {
                        diag = v;
                    } else {
                        off += v.abs();
                    }
                }
                diag > 0.0 && diag > off
            })
    }

    /// Solve with a right-hand side given per unknown, starting from `guess`.
    pub fn solve(&self, rhs: &[f64], guess: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        let mut x = guess.to_vec();
        let opts = SolveOptions {
            tol,
            ..Default::default()
        };
        let stats = solve_spd_with(&self.matrix, &self.pre, rhs, &mut x, &opts)?;
        Ok((x, stats))
    }

    fn gather(&self, field: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|&k| field[k]).collect()
    }

    fn scatter(&self, x: &[f64], len: usize) -> Vec<f64> {
        let mut out = vec![f64::NAN; len];
        for (r, &k) in self.cells.iter().enumerate() {
            out[k] = x[r];
        }
        out
    }
}

/// Diffusion systems for one geometry; reusable while the region is fixed.
#[derive(Debug, Clone)]
pub struct Operators {
    pub u: DiffusionSystem,
    pub v: Option<DiffusionSystem>,
}

impl Operators {
    pub fn new(geom: &CutCellGeometry, params: &Params, dt: f64, model: Model) -> Result<Self> {
        let u = assemble_diffusion_system(geom, params.d_u, dt)?;
        let v = match model {
            Model::TwoSpecies => Some(assemble_diffusion_system(geom, params.d_v, dt)?),
            Model::OneSpecies => None,
        };
        Ok(Operators { u, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub iterations_u: usize,
    pub iterations_v: usize,
    pub residual: f64,
}

fn check_len(state: &ConcentrationState, geom: &CutCellGeometry) -> Result<()> {
    let n = geom.grid.cell_count();
    for f in [&state.u, &state.v] {
        if f.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} cell values"),
                found: f.len().to_string(),
            });
        }
    }
    Ok(())
}

/// One implicit-diffusion, explicit-reaction step of both species at time `t`.
#[allow(clippy::too_many_arguments)]
pub fn step_two_species(
    state: &ConcentrationState,
    geom: &CutCellGeometry,
    ops: &Operators,
    params: &Params,
    stim: &StimulusConfig,
    t: f64,
    tol: f64,
) -> Result<(ConcentrationState, StepReport)> {
    check_len(state, geom)?;
    let sys_u = &ops.u;
    let sys_v = ops.v.as_ref().expect("two-species step needs a v operator");
    let g = &geom.grid;
    let dt = sys_u.dt;
    let n = sys_u.dim();
    let mut bu = vec![0.0; n];
    let mut bv = vec![0.0; n];
    for (r, &k) in sys_u.cells.iter().enumerate() {
        let (u, v) = (state.u[k], state.v[k]);
        if !(u.is_finite() && v.is_finite()) {
            let (i, j) = g.cell_ij(k);
            return Err(Error::MissingValue { i, j });
        }
        let (i, j) = g.cell_ij(k);
        let [x, y] = g.cell_center(i, j);
        let s = stimulus(x, y, t, stim) * v;
        let f = reaction_f(u, v, params.k, params.c);
        let a = sys_u.area[r];
        bu[r] = a * (u / dt + f + s);
        bv[r] = a * (v / dt - f - s);
    }
    let (xu, su) = sys_u.solve(&bu, &sys_u.gather(&state.u), tol)?;
    let (xv, sv) = sys_v.solve(&bv, &sys_v.gather(&state.v), tol)?;
    let len = g.cell_count();
    Ok((
        ConcentrationState {
            u: sys_u.scatter(&xu, len),
            v: sys_v.scatter(&xv, len),
            mass: state.mass,
        },
        StepReport {
            iterations_u: su.iterations,
            iterations_v: sv.iterations,
            residual: su.residual.max(sv.residual),
        },
    ))
}

/// `v̄ = (M - ∫u) / Area`.
pub fn mean_inactive(u: &[f64], geom: &CutCellGeometry, mass: f64) -> Result<f64> {
    let area = geom.total_area();
    if !(area > 0.0) {
        return Err(Error::EmptyRegion);
    }
    Ok((mass - crate::geometry::integrate_cell_region(u, geom)?) / area)
}

/// One step of the reduced model; `v` of the result holds `v̄` on every
/// active cell so that `∫(u + v) = M` holds for diagnostics.
pub fn step_one_species(
    state: &ConcentrationState,
    geom: &CutCellGeometry,
    ops: &Operators,
    params: &Params,
    tol: f64,
) -> Result<(ConcentrationState, StepReport)> {
    check_len(state, geom)?;
    let sys = &ops.u;
    let g = &geom.grid;
    let dt = sys.dt;
    let vbar = mean_inactive(&state.u, geom, state.mass)?;
    let mut b = vec![0.0; sys.dim()];
    for (r, &k) in sys.cells.iter().enumerate() {
        let u = state.u[k];
        if !u.is_finite() {
            let (i, j) = g.cell_ij(k);
            return Err(Error::MissingValue { i, j });
        }
        b[r] = sys.area[r] * (u / dt + reaction_f(u, vbar, params.k, params.c));
    }
    let (xu, su) = sys.solve(&b, &sys.gather(&state.u), tol)?;
    let u = sys.scatter(&xu, g.cell_count());
    let vbar_new = mean_inactive(&u, geom, state.mass)?;
    let v = u.iter().map(|x| if x.is_finite() { vbar_new } else { f64::NAN }).collect();
    Ok((
        ConcentrationState { u, v, mass: state.mass },
        StepReport {
            iterations_u: su.iterations,
            iterations_v: 0,
            residual: su.residual,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn disk_geom(r: f64, l: f64, h: f64) -> CutCellGeometry {
        let g = Grid::centered(l, h).unwrap();
        let phi = g.sample_nodes(|x, y| (x * x + y * y).sqrt() - r);
        CutCellGeometry::build(&g, &phi)
    }

    #[test]
    fn full_cells_give_five_point_stencil() {
        let g = Grid::centered(1.0, 0.25).unwrap();
        let geom = CutCellGeometry::build(&g, &vec![-1.0; g.node_count()]);
        let sys = assemble_diffusion_system(&geom, 2.0, 0.5).unwrap();
        let r = sys.index[g.cell(3, 3)];
        let row: Vec<(usize, f64)> = sys.matrix.row(r).collect();
        assert_eq!(row.len(), 5);
        let diag = sys.matrix.get(r, r);
        assert!((diag - (0.0625 / 0.5 + 4.0 * 2.0)).abs() < 1e-14);
        assert!(row.iter().filter(|e| e.0 != r).all(|e| e.1 == -2.0));
        assert!(sys.spd_certificate());
    }

    #[test]
    fn linear_field_has_zero_net_flux_in_full_cells() {
        let g = Grid::centered(1.0, 0.1).unwrap();
        let geom = CutCellGeometry::build(&g, &vec![-1.0; g.node_count()]);
        let dt = 1.0;
        let sys = assemble_diffusion_system(&geom, 1.0, dt).unwrap();
        let u: Vec<f64> = sys
            .cells
            .iter()
            .map(|&k| {
                let (i, j) = g.cell_ij(k);
                let c = g.cell_center(i, j);
                3.0 * c[0] - c[1]
            })
            .collect();
        let mut au = vec![0.0; u.len()];
        sys.matrix.mul_vec(&u, &mut au);
        let r = sys.index[g.cell(9, 9)];
        let flux = au[r] - sys.area[r] / dt * u[r];
        assert!(flux.abs() < 1e-12, "{flux}");
    }

    #[test]
    fn cut_matrix_is_symmetric() {
        let geom = disk_geom(1.1, 2.0, 0.1);
        let sys = assemble_diffusion_system(&geom, 0.3, 0.01).unwrap();
        assert!(sys.matrix.is_symmetric());
        assert!(sys.spd_certificate());
    }

    #[test]
    fn extension_reproduces_linear() {
        let small = disk_geom(1.0, 2.0, 0.1);
        let big = disk_geom(1.06, 2.0, 0.1);
        let st = ConcentrationState::from_fns(&small, 1.0, |x, y| x + 2.0 * y, |_, _| 7.0);
        let ext = extend_to_new_region(&st, &big).unwrap();
        let g = big.grid;
        for k in 0..g.cell_count() {
            if big.area[k] > 0.0 {
                let (i, j) = g.cell_ij(k);
                let [x, y] = g.cell_center(i, j);
                assert!((ext.u[k] - (x + 2.0 * y)).abs() < 1e-10, "{i} {j} {} {}", ext.u[k], x + 2.0 * y);
                assert_eq!(ext.v[k], 7.0);
            } else {
                assert!(ext.u[k].is_nan());
            }
        }
    }

    #[test]
    fn retreat_keeps_surviving_values() {
        let big = disk_geom(1.15, 2.0, 0.1);
        let small = disk_geom(1.0, 2.0, 0.1);
        let st = ConcentrationState::from_fns(&big, 1.0, |x, y| (x * y).sin(), |x, _| x);
        let ext = extend_to_new_region(&st, &small).unwrap();
        for k in 0..st.u.len() {
            if small.area[k] > 0.0 {
                assert_eq!(ext.u[k], st.u[k]);
                assert_eq!(ext.v[k], st.v[k]);
            } else {
                assert!(ext.u[k].is_nan());
            }
        }
    }

    #[test]
    fn isolated_new_cell_is_an_error() {
        let g = Grid::centered(1.0, 0.1).unwrap();
        let geom = CutCellGeometry::build(&g, &vec![-1.0; g.node_count()]);
        let mut field = vec![f64::NAN; g.cell_count()];
        field[g.cell(0, 0)] = 1.0;
        assert!(matches!(extend_field(&field, &geom), Err(Error::IsolatedNewCell { .. })));
    }

    #[test]
    fn mass_correction_shift() {
        let g = Grid::centered(1.0, 0.25).unwrap();
        let geom = CutCellGeometry::build(&g, &g.sample_nodes(|x, _| x));
        let area = geom.total_area();
        let mut st = ConcentrationState::from_fns(&geom, 0.0, |_, _| 0.25, |_, _| 0.5);
        st.mass = 0.75 * area + 0.5;
        let shift = mass_correct(&mut st, &geom).unwrap();
        assert!((shift - 0.5 / area).abs() < 1e-15);
        let (uu, vv) = st.totals(&geom).unwrap();
        assert!((uu + vv - st.mass).abs() < 1e-12 * st.mass);

        let empty = CutCellGeometry::build(&g, &vec![1.0; g.node_count()]);
        assert!(matches!(mass_correct(&mut st, &empty), Err(Error::EmptyRegion)));
    }

    #[test]
    fn kinetic_equilibrium_is_fixed() {
        let geom = disk_geom(1.0, 2.0, 0.1);
        let p = Params::default();
        let ops = Operators::new(&geom, &p, 0.005, Model::TwoSpecies).unwrap();
        let st = ConcentrationState::from_fns(&geom, 0.0, |_, _| 0.8, |_, _| 1.0);
        let (next, _) = step_two_species(&st, &geom, &ops, &p, &StimulusConfig::default(), 0.0, 1e-12).unwrap();
        for k in 0..st.u.len() {
            if geom.area[k] > 0.0 {
                assert!((next.u[k] - 0.8).abs() < 1e-10);
                assert!((next.v[k] - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn explicit_reaction_on_constants() {
        let geom = disk_geom(1.0, 2.0, 0.1);
        let p = Params::default();
        let dt = 0.005;
        let ops = Operators::new(&geom, &p, dt, Model::TwoSpecies).unwrap();
        let st = ConcentrationState::from_fns(&geom, 0.0, |_, _| 0.3, |_, _| 1.0);
        let f = reaction_f(0.3, 1.0, p.k, p.c);
        let (next, _) = step_two_species(&st, &geom, &ops, &p, &StimulusConfig::default(), 0.0, 1e-12).unwrap();
        for k in 0..st.u.len() {
            if geom.area[k] > 0.0 {
                assert!((next.u[k] - (0.3 + dt * f)).abs() < 1e-10);
                assert!((next.v[k] - (1.0 - dt * f)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn step_conserves_mass_on_fixed_geometry() {
        let geom = disk_geom(1.2, 2.0, 0.08);
        let p = Params::default();
        let ops = Operators::new(&geom, &p, 0.005, Model::TwoSpecies).unwrap();
        let mut st = ConcentrationState::from_fns(&geom, 6.0, |x, y| 0.4 + 0.3 * (3.0 * x).sin() * y, |x, _| 1.0 + 0.2 * x);
        mass_correct(&mut st, &geom).unwrap();
        let stim = StimulusConfig {
            enabled: true,
            ..Default::default()
        };
        let (next, _) = step_two_species(&st, &geom, &ops, &p, &stim, 0.2, 1e-12).unwrap();
        let (uu, vv) = next.totals(&geom).unwrap();
        assert!((uu + vv - 6.0).abs() < 1e-10 * 6.0);
    }

    #[test]
    fn one_species_fixed_points() {
        let geom = disk_geom(1.0, 2.0, 0.1);
        let p = Params::default();
        let a = geom.total_area();
        let ops = Operators::new(&geom, &p, 0.005, Model::OneSpecies).unwrap();
        let u0 = p.c * p.mass / (a * (1.0 + p.c));
        let st = ConcentrationState::from_fns(&geom, p.mass, |_, _| u0, |_, _| 0.0);
        let (next, _) = step_one_species(&st, &geom, &ops, &p, 1e-12).unwrap();
        assert!(next.u.iter().filter(|x| x.is_finite()).all(|x| (x - u0).abs() < 1e-10));

        let st = ConcentrationState::from_fns(&geom, p.mass, |_, _| 0.0, |_, _| 0.0);
        let (next, _) = step_one_species(&st, &geom, &ops, &p, 1e-12).unwrap();
        assert!(next.u.iter().filter(|x| x.is_finite()).all(|&x| x.abs() < 1e-14));
        let (uu, vv) = next.totals(&geom).unwrap();
        assert!((uu + vv - p.mass).abs() < 1e-12);
    }

    #[test]
    fn mean_inactive_arithmetic() {
        let g = Grid::centered(1.0, 0.25).unwrap();
        // area 3 region: all but the top quarter strip
        let geom = CutCellGeometry::build(&g, &g.sample_nodes(|_, y| y - 0.5));
        assert!((geom.total_area() - 3.0).abs() < 1e-12);
        let u: Vec<f64> = (0..g.cell_count()).map(|k| if geom.area[k] > 0.0 { 0.5 } else { f64::NAN }).collect();
        assert!((mean_inactive(&u, &geom, 6.0).unwrap() - 1.5).abs() < 1e-12);
    }
}
