//! Time stepping of the coupled boundary/concentration system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extension::extend_velocity;
use crate::geometry::{interface_crossings, CutCellGeometry};
use crate::grid::Grid;
use crate::kinetics::{Params, StimulusConfig};
use crate::levelset::{
    advance_cached, init_shape, redistance, ImplicitCurvatureSystem, LevelSetField, LevelSetStepConfig, ShapeSpec,
    DEFAULT_EPS_CURV, DEFAULT_REDISTANCE_ITERS,
};
use crate::reaction_diffusion::{
    extend_field, extend_to_new_region, mass_correct, mean_inactive, step_one_species, step_two_species,
    ConcentrationState, Model, Operators, DIFFUSION_TOL,
};
use crate::trajectory::center_velocity;

/// Initial `u`; `v` starts uniform at `(M - ∫u) / Area`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConcentration {
    Uniform { u: f64 },
    /// Independent uniform draws in `[lo, hi]` per cell.
    Random { lo: f64, hi: f64 },
    /// `u_hi` where `y >= y_threshold`, `u_lo` elsewhere.
    Front { u_hi: f64, u_lo: f64, y_threshold: f64 },
    /// Spatially uniform kinetic equilibrium `u = C v`.
    Equilibrium,
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub name: String,
    pub d_u: f64,
    pub d_v: f64,
    pub k: f64,
    pub c: f64,
    pub chi: f64,
    pub u_star: f64,
    pub mass: f64,
    /// Box is `(-L, L)^2` before any shift.
    pub half_width: f64,
    pub h: f64,
    pub dt: f64,
    pub t_final: f64,
    pub model: Model,
    pub stationary: bool,
    pub seed: u64,
    pub output_every: f64,
    /// Distance from the box edge, in grid cells, that triggers a shift.
    pub shift_margin: f64,
    pub redistance_iters: usize,
    pub eps_curv: f64,
    pub levelset_tol: f64,
    pub diffusion_tol: f64,
    pub shape: ShapeSpec,
    pub initial: InitialConcentration,
    pub stimulus: StimulusConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let p = Params::default();
        SimulationConfig {
            name: "custom".into(),
            d_u: p.d_u,
            d_v: p.d_v,
            k: p.k,
            c: p.c,
            chi: p.chi,
            u_star: p.u_star,
            mass: p.mass,
            half_width: 3.0,
            h: 0.06,
            dt: 0.005,
            t_final: 40.0,
            model: Model::TwoSpecies,
            stationary: false,
            seed: 0,
            output_every: 0.1,
            shift_margin: 5.0,
            redistance_iters: DEFAULT_REDISTANCE_ITERS,
            eps_curv: DEFAULT_EPS_CURV,
            levelset_tol: 1e-10,
            diffusion_tol: DIFFUSION_TOL,
            shape: ShapeSpec::Circle {
                center: [0.0, -1.0],
                radius: 1.3,
            },
            initial: InitialConcentration::Front {
                u_hi: 0.8,
                u_lo: 0.0,
                y_threshold: -0.8,
            },
            stimulus: StimulusConfig::default(),
        }
    }
}

impl SimulationConfig {
    pub fn params(&self) -> Params {
        Params {
            d_u: self.d_u,
            d_v: self.d_v,
            k: self.k,
            c: self.c,
            chi: self.chi,
            u_star: self.u_star,
            mass: self.mass,
        }
    }

    pub fn set_params(&mut self, p: &Params) {
        self.d_u = p.d_u;
        self.d_v = p.d_v;
        self.k = p.k;
        self.c = p.c;
        self.chi = p.chi;
        self.u_star = p.u_star;
        self.mass = p.mass;
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::centered(self.half_width, self.h)
    }

    /// Steps between diagnostic records.
    pub fn output_stride(&self) -> usize {
        ((self.output_every / self.dt).round() as usize).max(1)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.params().violations();
        let pos = [
            ("half_width", self.half_width),
            ("h", self.h),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("eps_curv", self.eps_curv),
            ("levelset_tol", self.levelset_tol),
            ("diffusion_tol", self.diffusion_tol),
        ];
        for (name, x) in pos {
            if !(x > 0.0 && x.is_finite()) {
                v.push(format!("{name} = {x} must be positive"));
            }
        }
        if !(self.output_every >= self.dt) {
            v.push(format!("output_every = {} must be at least dt = {}", self.output_every, self.dt));
        }
        if !(self.shift_margin >= 3.0) {
            v.push(format!("shift_margin = {} must be at least 3 cells", self.shift_margin));
        }
        if self.half_width > 0.0 && self.h > 0.0 {
            if let Err(e) = self.grid() {
                v.push(e.to_string());
            }
        }
        match self.initial {
            InitialConcentration::Random { lo, hi } if !(hi >= lo) => {
                v.push(format!("random range [{lo}, {hi}] is empty"));
            }
            _ => {}
        }
        if self.stimulus.enabled {
            v.extend(self.stimulus.violations());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

/// One diagnostics record; centers are in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    #[serde(rename = "U")]
    pub u_total: f64,
    #[serde(rename = "V")]
    pub v_total: f64,
    pub mass: f64,
    pub area: f64,
    pub xc: f64,
    pub yc: f64,
    pub vx: f64,
    pub vy: f64,
}

/// Fill `vx`, `vy` from the centers.
pub fn center_and_velocity(records: &mut [Record]) {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let x: Vec<f64> = records.iter().map(|r| r.xc).collect();
    let y: Vec<f64> = records.iter().map(|r| r.yc).collect();
    let (vx, vy) = center_velocity(&t, &x, &y);
    for (r, (a, b)) in records.iter_mut().zip(vx.into_iter().zip(vy)) {
        r.vx = a;
        r.vy = b;
    }
}

/// Full simulation state at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub phi: LevelSetField,
    pub conc: ConcentrationState,
    /// World position of the box frame origin.
    pub offset: [f64; 2],
}

/// Cumulative integer shift applied by [`maybe_shift_box`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shift {
    pub di: i64,
    pub dj: i64,
}

/// Smallest distance from an interface crossing to the box edge, or zero
/// when the region already reaches the boundary.
pub fn boundary_clearance(phi: &LevelSetField) -> f64 {
    let g = &phi.grid;
    if crate::geometry::touches_boundary(g, &phi.values) {
        return 0.0;
    }
    let (w, hgt) = ((g.nx - 1) as f64 * g.h, (g.ny - 1) as f64 * g.h);
    let (x0, y0) = (g.origin[0], g.origin[1]);
    interface_crossings(g, &phi.values)
        .iter()
        .map(|c| {
            let [x, y] = c.point;
            (x - x0).min(x0 + w - x).min(y - y0).min(y0 + hgt - y)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Recenter the box on the cell when its boundary comes within
/// `margin_cells * h` of the box edge. Fields are re-indexed by a whole
/// number of cells; vacated level-set entries copy the nearest edge value.
pub fn maybe_shift_box(state: &mut SimState, margin_cells: f64) -> Result<Option<Shift>> {
    let g = state.phi.grid;
    let h = g.h;
    if boundary_clearance(&state.phi) >= margin_cells * h {
        return Ok(None);
    }
    let crossings = interface_crossings(&g, &state.phi.values);
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for c in &crossings {
        for a in 0..2 {
            lo[a] = lo[a].min(c.point[a]);
            hi[a] = hi[a].max(c.point[a]);
        }
    }
    let (w, hgt) = ((g.nx - 1) as f64 * h, (g.ny - 1) as f64 * h);
    let touches = crate::geometry::touches_boundary(&g, &state.phi.values);
    if touches || hi[0] - lo[0] > w - 4.0 * h || hi[1] - lo[1] > hgt - 4.0 * h {
        return Err(Error::CellLargerThanBox);
    }
    let geom = CutCellGeometry::build(&g, &state.phi.values);
    let [cx, cy] = geom.centroid().ok_or(Error::EmptyRegion)?;
    let di = ((cx - (g.origin[0] + 0.5 * w)) / h).round() as i64;
    let dj = ((cy - (g.origin[1] + 0.5 * hgt)) / h).round() as i64;
    if di == 0 && dj == 0 {
        return Ok(None);
    }
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut phi = vec![0.0; g.node_count()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let si = clamp(i as i64 + di, g.nx);
            let sj = clamp(j as i64 + dj, g.ny);
            phi[g.node(i, j)] = state.phi.values[g.node(si, sj)];
        }
    }
    let remap = |f: &[f64]| -> Vec<f64> {
        let mut out = vec![f64::NAN; g.cell_count()];
        for j in 0..g.cells_y() {
            for i in 0..g.cells_x() {
                let (si, sj) = (i as i64 + di, j as i64 + dj);
                if si >= 0 && sj >= 0 && (si as usize) < g.cells_x() && (sj as usize) < g.cells_y() {
                    out[g.cell(i, j)] = f[g.cell(si as usize, sj as usize)];
                }
            }
        }
        out
    };
    state.conc.u = remap(&state.conc.u);
    state.conc.v = remap(&state.conc.v);
    state.phi.values = phi;
    state.offset[0] += di as f64 * h;
    state.offset[1] += dj as f64 * h;
    Ok(Some(Shift { di, dj }))
}

/// Initial state for `cfg`.
pub fn initial_state(cfg: &SimulationConfig) -> Result<SimState> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let phi = init_shape(&grid, &cfg.shape)?;
    let geom = phi.geometry();
    let area = geom.total_area();
    if !(area > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut u = vec![f64::NAN; grid.cell_count()];
    for k in 0..grid.cell_count() {
        // one draw per cell keeps the random field independent of the shape
        let draw: f64 = rng.gen();
        if geom.area[k] <= 0.0 {
            continue;
        }
        let (i, j) = grid.cell_ij(k);
        let [_, y] = grid.cell_center(i, j);
        u[k] = match cfg.initial {
            InitialConcentration::Uniform { u } => u,
            InitialConcentration::Random { lo, hi } => lo + (hi - lo) * draw,
            InitialConcentration::Front { u_hi, u_lo, y_threshold } => {
                if y >= y_threshold {
                    u_hi
                } else {
                    u_lo
                }
            }
            InitialConcentration::Equilibrium => cfg.c * cfg.mass / (area * (1.0 + cfg.c)),
        };
    }
    let v0 = mean_inactive(&u, &geom, cfg.mass)?;
    let v = u.iter().map(|x| if x.is_finite() { v0 } else { f64::NAN }).collect();
    Ok(SimState {
        t: 0.0,
        phi,
        conc: ConcentrationState { u, v, mass: cfg.mass },
        offset: [0.0, 0.0],
    })
}

/// Per-step solver statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub levelset_iterations: usize,
    pub diffusion_iterations: usize,
    pub shifted: bool,
    /// Whether every sweep of the velocity extension converged.
    pub extension_converged: bool,
}

/// Stateful runner.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimulationConfig,
    pub state: SimState,
    pub records: Vec<Record>,
    /// Steps taken since `t = 0`.
    pub step_index: usize,
    levelset_cache: Option<ImplicitCurvatureSystem>,
    fixed_ops: Option<Operators>,
    geom: CutCellGeometry,
}

impl Simulation {
    pub fn new(config: SimulationConfig) -> Result<Self> {
        let state = initial_state(&config)?;
        Self::from_state(config, state)
    }

    /// Continue from an existing state (for restarts).
    pub fn from_state(config: SimulationConfig, state: SimState) -> Result<Self> {
        config.validate()?;
        let grid = config.grid()?;
        if state.phi.grid.nx != grid.nx || state.phi.grid.ny != grid.ny || state.phi.grid.h != grid.h {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} nodes, h = {}", grid.nx, grid.ny, grid.h),
                found: format!("{}x{} nodes, h = {}", state.phi.grid.nx, state.phi.grid.ny, state.phi.grid.h),
            });
        }
        let geom = state.phi.geometry();
        let step_index = (state.t / config.dt).round() as usize;
        let mut sim = Simulation {
            config,
            state,
            records: Vec::new(),
            step_index,
            levelset_cache: None,
            fixed_ops: None,
            geom,
        };
        sim.state.conc.mass = sim.config.mass;
        sim.record()?;
        Ok(sim)
    }

    pub fn geometry(&self) -> &CutCellGeometry {
        &self.geom
    }

    fn record(&mut self) -> Result<()> {
        let (uu, vv) = self.state.conc.totals(&self.geom)?;
        let area = self.geom.total_area();
        let [cx, cy] = self.geom.centroid().ok_or(Error::EmptyRegion)?;
        self.records.push(Record {
            t: self.state.t,
            u_total: uu,
            v_total: vv,
            mass: uu + vv,
            area,
            xc: cx + self.state.offset[0],
            yc: cy + self.state.offset[1],
            vx: 0.0,
            vy: 0.0,
        });
        Ok(())
    }

    /// Advance one time step.
    pub fn step(&mut self) -> Result<StepInfo> {
        let step = self.step_index;
        let t = self.state.t;
        self.step_inner().map_err(|e| Error::Step {
            step,
            t,
            dump: None,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self) -> Result<StepInfo> {
        let cfg = self.config.clone();
        let params = cfg.params();
        if cfg.stationary && self.fixed_ops.is_none() {
            self.fixed_ops = Some(Operators::new(&self.geom, &params, cfg.dt, cfg.model)?);
        }
        let mut info = StepInfo {
            extension_converged: true,
            ..Default::default()
        };
        let mut next = self.state.clone();

        let new_geom = if cfg.stationary {
            None
        } else {
            let ext = extend_velocity(&next.conc.u, &next.phi)?;
            info.extension_converged = ext.converged;
            let mut ls = LevelSetStepConfig::new(cfg.chi, cfg.u_star, cfg.dt);
            ls.eps_curv = cfg.eps_curv;
            ls.tol = cfg.levelset_tol;
            let (phi, stats) = advance_cached(&next.phi, &ext.values, &ls, &mut self.levelset_cache)?;
            info.levelset_iterations = stats.iterations;
            next.phi = redistance(&phi, cfg.redistance_iters);
            Some(next.phi.geometry())
        };

        let geom = new_geom.as_ref().unwrap_or(&self.geom);
        let ops_owned;
        let ops = match &self.fixed_ops {
            Some(ops) if new_geom.is_none() => ops,
            _ => {
                ops_owned = Operators::new(geom, &params, cfg.dt, cfg.model)?;
                &ops_owned
            }
        };

        let (conc, report) = match cfg.model {
            Model::TwoSpecies => {
                let mut ext = if new_geom.is_some() {
                    extend_to_new_region(&next.conc, geom)?
                } else {
                    next.conc.clone()
                };
                mass_correct(&mut ext, geom)?;
                step_two_species(&ext, geom, ops, &params, &cfg.stimulus, next.t, cfg.diffusion_tol)?
            }
            Model::OneSpecies => {
                let mut ext = next.conc.clone();
                if new_geom.is_some() {
                    ext.u = extend_field(&next.conc.u, geom)?;
                }
                step_one_species(&ext, geom, ops, &params, cfg.diffusion_tol)?
            }
        };
        info.diffusion_iterations = report.iterations_u + report.iterations_v;
        next.conc = conc;
        self.step_index += 1;
        next.t = self.step_index as f64 * cfg.dt;

        if let Some(g) = new_geom {
            self.geom = g;
            if let Some(s) = maybe_shift_box(&mut next, cfg.shift_margin)? {
                info.shifted = s.di != 0 || s.dj != 0;
                self.geom = next.phi.geometry();
            }
        }
        self.state = next;
        if self.step_index % self.config.output_stride() == 0 {
            self.record()?;
        }
        Ok(info)
    }

    /// Step until `t_final`, calling `observer` after every step.
    pub fn run_with(&mut self, t_final: f64, mut observer: impl FnMut(&Simulation, &StepInfo)) -> Result<()> {
        let last = (t_final / self.config.dt).round() as usize;
        while self.step_index < last {
            let info = self.step()?;
            observer(self, &info);
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        let t = self.config.t_final;
        self.run_with(t, |_, _| {})
    }

    /// Diagnostics with center velocities filled in.
    pub fn diagnostics(&self) -> Vec<Record> {
        let mut r = self.records.clone();
        center_and_velocity(&mut r);
        r
    }
}

/// Run a configuration to completion.
pub fn run(config: SimulationConfig) -> Result<(Vec<Record>, SimState)> {
    let mut sim = Simulation::new(config)?;
    sim.run()?;
    Ok((sim.diagnostics(), sim.state))
}
