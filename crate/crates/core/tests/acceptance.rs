//! Acceptance scenarios. Prints one PASS/FAIL line per criterion and a
//! summary; outcomes are reported, not asserted, so that known failures
//! stay visible without hiding the others. Pass substrings as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- straight`.

use std::collections::VecDeque;
use std::time::Instant;

use wavepin::convergence::{self, Refined};
use wavepin::driver::{InitialConcentration, Record, Simulation, SimulationConfig};
use wavepin::extension::{extend_velocity, sample_on_interface};
use wavepin::geometry::CutCellGeometry;
use wavepin::io::Snapshot;
use wavepin::kinetics::reaction_f;
use wavepin::levelset::{init_shape, redistance, LevelSetField, ShapeSpec};
use wavepin::reaction_diffusion::assemble_diffusion_system;
use wavepin::trajectory::{classify_trajectory, preparation_time, Classification, TrajectoryKind};
use wavepin::{config, Grid, Result};

const MASS_DRIFT: f64 = 1e-8;
const MASS_RUNTIME_S: f64 = 600.0;
const CURVATURE_REL: f64 = 0.02;
const MIN_ORDER: f64 = 1.0;
const FRONT_SPEED: f64 = 1e-3;
const FRONT_LEVEL: f64 = 0.5;
const STRAIGHT_LATERAL_CELLS: f64 = 10.0;
const PREP_WINDOW: f64 = 5.0;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// Run to the configured final time. The records gathered before a failure
/// are returned alongside the error.
fn run_records(cfg: SimulationConfig) -> (Vec<Record>, Option<wavepin::Error>) {
    let mut sim = match Simulation::new(cfg) {
        Ok(s) => s,
        Err(e) => return (Vec::new(), Some(e)),
    };
    let err = sim.run().err();
    (sim.diagnostics(), err)
}

fn columns(r: &[Record]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (
        r.iter().map(|r| r.t).collect(),
        r.iter().map(|r| r.xc).collect(),
        r.iter().map(|r| r.yc).collect(),
    )
}

struct Path {
    class: Option<Classification>,
    prep: Option<f64>,
    error: Option<String>,
    t_end: f64,
}

impl Path {
    fn kind(&self) -> Option<TrajectoryKind> {
        self.class.map(|c| c.kind)
    }

    fn radius(&self) -> Option<f64> {
        self.class.and_then(|c| c.radius)
    }

    fn describe(&self) -> String {
        let mut s = format!("t_end {:.2}", self.t_end);
        if let Some(c) = &self.class {
            s += &format!(
                ", {:?} (turn {:.2} rad, lateral {:.3}, monotone {})",
                c.kind, c.heading_change, c.lateral_ratio, c.monotone
            );
            if let Some(r) = c.radius {
                s += &format!(", radius {r:.3}");
            }
        }
        if let Some(p) = self.prep {
            s += &format!(", prep {p:.2}");
        }
        if let Some(e) = &self.error {
            s += &format!(", error: {e}");
        }
        s
    }
}

/// Classify after the preparation window of the expected kind. A run that
/// stopped early is classified on what it produced and reported as failed.
fn path_of(cfg: SimulationConfig, expected: TrajectoryKind) -> (Path, Vec<Record>) {
    let (records, err) = run_records(cfg);
    let (t, x, y) = columns(&records);
    let prep = preparation_time(&t, &x, &y, expected, PREP_WINDOW);
    let class = classify_trajectory(&t, &x, &y, prep.unwrap_or(0.0));
    let mut error = err.map(|e| e.to_string());
    if let Err(e) = &class {
        error.get_or_insert(e.to_string());
    }
    let path = Path {
        class: class.ok(),
        prep,
        error,
        t_end: t.last().copied().unwrap_or(0.0),
    };
    (path, records)
}

fn cases(name: &str) -> Result<Vec<SimulationConfig>> {
    config::preset_cases(name)
}

fn mass_conservation() -> Result<Verdict> {
    let cfg = config::preset("mass_check")?;
    let start = Instant::now();
    let (records, err) = run_records(cfg.clone());
    let secs = start.elapsed().as_secs_f64();
    let m0 = cfg.mass;
    let drift = records.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max);
    let reached = records.last().map_or(0.0, |r| r.t);
    let mut detail = format!("max drift {drift:.3e} (< {MASS_DRIFT:e}) to t = {reached:.2}, {secs:.0} s");
    if let Some(e) = &err {
        detail += &format!(", error: {e}");
    }
    verdict(err.is_none() && drift < MASS_DRIFT && secs < MASS_RUNTIME_S, detail)
}

fn curvature_flow() -> Result<Verdict> {
    let cfg = SimulationConfig {
        name: "curvature_flow".into(),
        k: 0.0,
        chi: 0.1,
        u_star: 0.3,
        h: 0.05,
        half_width: 2.0,
        t_final: 3.0,
        output_every: 0.05,
        shape: ShapeSpec::Circle {
            center: [0.0, 0.0],
            radius: 1.0,
        },
        initial: InitialConcentration::Uniform { u: 0.3 },
        ..Default::default()
    };
    let (records, err) = run_records(cfg);
    if let Some(e) = err {
        return verdict(false, format!("error: {e}"));
    }
    let mut worst = (0.0, 0.0);
    for r in records.iter().filter(|r| r.t >= 0.5 - 1e-9 && r.t <= 3.0 + 1e-9) {
        let radius = (r.area / std::f64::consts::PI).sqrt();
        let exact = (1.0 - 0.2 * r.t).sqrt();
        let rel = (radius / exact - 1.0).abs();
        if rel > worst.0 {
            worst = (rel, r.t);
        }
    }
    verdict(
        worst.0 < CURVATURE_REL,
        format!("max relative radius error {:.3e} at t = {:.2} (< {CURVATURE_REL})", worst.0, worst.1),
    )
}

fn convergence_study() -> Result<Verdict> {
    let cases = cases("convergence_study")?;
    let mut finals = Vec::with_capacity(cases.len());
    for cfg in &cases {
        let mut sim = Simulation::new(cfg.clone())?;
        if let Err(e) = sim.run() {
            return verdict(false, format!("{}: {e}", cfg.name));
        }
        finals.push(sim.state);
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for s in convergence::studies(&cases, &finals) {
        let label = match s.refined {
            Refined::TimeStep => "dt",
            Refined::GridSize => "h",
        };
        let ok = s.monotone() && s.min_order().is_some_and(|p| p >= MIN_ORDER);
        pass &= ok;
        parts.push(format!(
            "{label}: distances {:?} orders {:?}",
            s.distances.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>(),
            s.orders.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>()
        ));
    }
    verdict(pass, format!("{} (monotone, order >= {MIN_ORDER})", parts.join("; ")))
}

/// Points where `u` crosses `level` between neighbouring active cells.
fn level_points(geom: &CutCellGeometry, u: &[f64], level: f64) -> Vec<[f64; 2]> {
    let g = geom.grid;
    let mut out = Vec::new();
    for j in 0..g.cells_y() {
        for i in 0..g.cells_x() {
            if !geom.is_active(i, j) {
                continue;
            }
            for (ni, nj) in [(i + 1, j), (i, j + 1)] {
                if ni >= g.cells_x() || nj >= g.cells_y() || !geom.is_active(ni, nj) {
                    continue;
                }
                let (a, b) = (u[g.cell(i, j)], u[g.cell(ni, nj)]);
                if (a - level) * (b - level) < 0.0 {
                    let s = (level - a) / (b - a);
                    let p = g.cell_center(i, j);
                    let q = g.cell_center(ni, nj);
                    out.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
                }
            }
        }
    }
    out
}

fn point_hausdorff(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let directed = |p: &[[f64; 2]], q: &[[f64; 2]]| {
        p.iter()
            .map(|x| q.iter().map(|y| (x[0] - y[0]).hypot(x[1] - y[1])).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Number of 4-connected components of active cells with `u >= level`.
fn components(geom: &CutCellGeometry, u: &[f64], level: f64) -> usize {
    let g = geom.grid;
    let (nx, ny) = (g.cells_x(), g.cells_y());
    let inside = |i: usize, j: usize| geom.is_active(i, j) && u[g.cell(i, j)] >= level;
    let mut seen = vec![false; nx * ny];
    let mut count = 0;
    for j in 0..ny {
        for i in 0..nx {
            if seen[g.cell(i, j)] || !inside(i, j) {
                continue;
            }
            count += 1;
            let mut queue = VecDeque::from([(i, j)]);
            seen[g.cell(i, j)] = true;
            while let Some((a, b)) = queue.pop_front() {
                let mut next = Vec::with_capacity(4);
                if a > 0 {
                    next.push((a - 1, b));
                }
                if b > 0 {
                    next.push((a, b - 1));
                }
                if a + 1 < nx {
                    next.push((a + 1, b));
                }
                if b + 1 < ny {
                    next.push((a, b + 1));
                }
                for (p, q) in next {
                    if !seen[g.cell(p, q)] && inside(p, q) {
                        seen[g.cell(p, q)] = true;
                        queue.push_back((p, q));
                    }
                }
            }
        }
    }
    count
}

/// Area-weighted centroid of the cells with `u >= level`.
fn region_centroid(geom: &CutCellGeometry, u: &[f64], level: f64) -> Option<[f64; 2]> {
    let g = geom.grid;
    let (mut a, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for j in 0..g.cells_y() {
        for i in 0..g.cells_x() {
            let k = g.cell(i, j);
            if geom.is_active(i, j) && u[k] >= level {
                let [x, y] = g.cell_center(i, j);
                a += geom.area[k];
                sx += geom.area[k] * x;
                sy += geom.area[k] * y;
            }
        }
    }
    (a > 0.0).then(|| [sx / a, sy / a])
}

fn polarization_random() -> Result<Verdict> {
    let cfg = config::preset("polarization_random")?;
    let t_end = cfg.t_final;
    let gap = 0.1;
    let mut sim = Simulation::new(cfg)?;
    sim.run_with(t_end - gap, |_, _| {})?;
    let before = level_points(sim.geometry(), &sim.state.conc.u, FRONT_LEVEL);
    sim.run_with(t_end, |_, _| {})?;
    let after = level_points(sim.geometry(), &sim.state.conc.u, FRONT_LEVEL);
    let n = components(sim.geometry(), &sim.state.conc.u, FRONT_LEVEL);
    if before.is_empty() || after.is_empty() {
        return verdict(false, format!("no u = {FRONT_LEVEL} front at t = {t_end} ({n} components)"));
    }
    let speed = point_hausdorff(&before, &after) / gap;
    verdict(
        n == 1 && speed < FRONT_SPEED,
        format!("{n} component(s), front speed {speed:.3e} (< {FRONT_SPEED:e}) at t = {t_end}"),
    )
}

fn stimulus_reversal() -> Result<Verdict> {
    let cfg = config::preset("polarization_stimulus")?;
    let mut sim = Simulation::new(cfg)?;
    let probe = |sim: &Simulation| {
        let geom = sim.geometry();
        let cell = geom.centroid();
        let front = region_centroid(geom, &sim.state.conc.u, FRONT_LEVEL);
        cell.zip(front).map(|(c, f)| [f[0] - c[0], f[1] - c[1]])
    };
    sim.run_with(10.0, |_, _| {})?;
    let first = probe(&sim);
    sim.run_with(20.0, |_, _| {})?;
    let second = probe(&sim);
    match (first, second) {
        (Some(a), Some(b)) => {
            let dot = a[0] * b[0] + a[1] * b[1];
            verdict(
                dot < 0.0,
                format!(
                    "front offset t=10 ({:.3}, {:.3}), t=20 ({:.3}, {:.3}), dot {dot:.3e} (< 0)",
                    a[0], a[1], b[0], b[1]
                ),
            )
        }
        _ => verdict(false, format!("no u >= {FRONT_LEVEL} region (t=10: {first:?}, t=20: {second:?})")),
    }
}

fn straight_trajectory() -> Result<Verdict> {
    let cfg = config::preset("trajectory_straight")?;
    let h = cfg.h;
    let (path, records) = path_of(cfg, TrajectoryKind::Straight);
    let lateral = records.iter().map(|r| r.xc.abs()).fold(0.0, f64::max);
    let bound = STRAIGHT_LATERAL_CELLS * h;
    verdict(
        path.error.is_none() && path.kind() == Some(TrajectoryKind::Straight) && lateral < bound,
        format!("{}, max |xc| {lateral:.3e} (< {bound})", path.describe()),
    )
}

fn circular_trajectory() -> Result<Verdict> {
    let (path, _) = path_of(config::preset("trajectory_circular")?, TrajectoryKind::Circular);
    let monotone = path.class.is_some_and(|c| c.monotone);
    verdict(
        path.error.is_none() && path.kind() == Some(TrajectoryKind::Circular) && monotone,
        path.describe(),
    )
}

fn diffusion_sweep() -> Result<Verdict> {
    let expected = [TrajectoryKind::Straight, TrajectoryKind::Circular, TrajectoryKind::Circular];
    let paths: Vec<Path> = cases("diffusion_sweep")?
        .into_iter()
        .zip(expected)
        .map(|(cfg, k)| path_of(cfg, k).0)
        .collect();
    let kinds_ok = paths.iter().zip(expected).all(|(p, k)| p.error.is_none() && p.kind() == Some(k));
    let prep_ok = matches!((paths[1].prep, paths[2].prep), (Some(a), Some(b)) if b < a);
    let radius_ok = matches!((paths[1].radius(), paths[2].radius()), (Some(a), Some(b)) if b < a);
    let detail = paths
        .iter()
        .enumerate()
        .map(|(k, p)| format!("case {}: {}", k + 1, p.describe()))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(kinds_ok && prep_ok && radius_ok, detail)
}

fn contractility_sweep() -> Result<Verdict> {
    let paths: Vec<Path> = cases("contractility_sweep")?
        .into_iter()
        .map(|cfg| path_of(cfg, TrajectoryKind::Circular).0)
        .collect();
    let kinds_ok = paths
        .iter()
        .all(|p| p.error.is_none() && p.kind() == Some(TrajectoryKind::Circular));
    let radii: Option<Vec<f64>> = paths.iter().map(Path::radius).collect();
    let onsets: Option<Vec<f64>> = paths.iter().map(|p| p.prep).collect();
    let decreasing = |v: &Option<Vec<f64>>| v.as_ref().is_some_and(|v| v.windows(2).all(|w| w[1] < w[0]));
    let detail = paths
        .iter()
        .zip(["0.25", "0.3", "0.4"])
        .map(|(p, us)| format!("u* = {us}: {}", p.describe()))
        .collect::<Vec<_>>()
        .join("; ");
    verdict(kinds_ok && decreasing(&radii) && decreasing(&onsets), detail)
}

fn one_vs_two_species() -> Result<Verdict> {
    let cs = cases("one_vs_two_species")?;
    let (two, _) = path_of(cs[0].clone(), TrajectoryKind::Straight);
    let (one, _) = path_of(cs[1].clone(), TrajectoryKind::Circular);
    verdict(
        two.error.is_none()
            && one.error.is_none()
            && two.kind() == Some(TrajectoryKind::Straight)
            && one.kind() == Some(TrajectoryKind::Circular),
        format!("two-species: {}; one-species: {}", two.describe(), one.describe()),
    )
}

fn central_gradient(g: &Grid, f: &[f64], i: usize, j: usize) -> [f64; 2] {
    [
        (f[g.node(i + 1, j)] - f[g.node(i - 1, j)]) / (2.0 * g.h),
        (f[g.node(i, j + 1)] - f[g.node(i, j - 1)]) / (2.0 * g.h),
    ]
}

fn property_suites() -> Result<Verdict> {
    let mut failed = Vec::new();
    let cfg = SimulationConfig {
        h: 0.1,
        t_final: 0.5,
        output_every: 0.005,
        ..config::preset("trajectory_straight")?
    };

    // SPD certificate on every matrix assembled along a moving run
    let mut spd_ok = true;
    let mut sim = Simulation::new(cfg.clone())?;
    sim.run_with(cfg.t_final, |s, _| {
        for d in [s.config.d_u, s.config.d_v] {
            match assemble_diffusion_system(s.geometry(), d, s.config.dt) {
                Ok(sys) => spd_ok &= sys.matrix.is_symmetric() && sys.spd_certificate(),
                Err(_) => spd_ok = false,
            }
        }
    })?;
    if !spd_ok {
        failed.push("spd");
    }

    // extension creates no new extrema on the run state
    let phi = redistance(&sim.state.phi, 10);
    let g = phi.grid;
    let u = &sim.state.conc.u;
    let samples = sample_on_interface(u, &phi)?;
    let lo = samples.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.value).fold(f64::NEG_INFINITY, f64::max);
    let ext = extend_velocity(u, &phi)?;
    let mut ext_ok = (0..g.node_count())
        .filter(|&k| phi.values[k] > 0.0)
        .all(|k| ext.values[k] >= lo - 1e-12 && ext.values[k] <= hi + 1e-12);

    // normal derivative of the extension of smooth interface data
    let eg = Grid::centered(2.5, 0.05)?;
    let shapes = [
        ShapeSpec::Circle {
            center: [0.0, 0.0],
            radius: 1.0,
        },
        ShapeSpec::Polar {
            center: [0.2, -0.1],
            cos_coeffs: vec![1.2, 0.0, 0.2],
        },
    ];
    for shape in &shapes {
        let phi = init_shape(&eg, shape)?;
        let [cx, cy] = shape.center();
        let cells = eg.sample_cells(|x, y| {
            let th = (y - cy).atan2(x - cx);
            0.5 + 0.3 * th.cos() + 0.2 * (2.0 * th).sin()
        });
        let inside = phi.geometry();
        let u: Vec<f64> = cells
            .iter()
            .zip(&inside.area)
            .map(|(&v, &a)| if a > 0.0 { v } else { f64::NAN })
            .collect();
        let ext = extend_velocity(&u, &phi)?;
        let umax = u.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
        for j in 1..eg.ny - 1 {
            for i in 1..eg.nx - 1 {
                let p = phi.at(i, j);
                if p > 2.0 * eg.h && p < 10.0 * eg.h {
                    let n = central_gradient(&eg, &phi.values, i, j);
                    let du = central_gradient(&eg, &ext.values, i, j);
                    ext_ok &= ((n[0] * du[0] + n[1] * du[1]) / n[0].hypot(n[1])).abs() < 0.1 * umax;
                }
            }
        }
    }
    if !ext_ok {
        failed.push("extension");
    }

    // redistancing of a stretched level set
    let shape = ShapeSpec::Polar {
        center: [0.1, -0.2],
        cos_coeffs: vec![1.1, 0.0, -0.25, 0.08],
    };
    let rg = Grid::centered(2.5, 0.1)?;
    let exact = init_shape(&rg, &shape)?;
    let mut redist_ok = true;
    for s in [0.4, 2.5] {
        let scaled = LevelSetField {
            grid: rg,
            values: exact.values.iter().map(|p| s * p).collect(),
        };
        let r = redistance(&scaled, 10);
        for j in 1..rg.ny - 1 {
            for i in 1..rg.nx - 1 {
                if r.at(i, j).abs() < 3.0 * rg.h {
                    let d = central_gradient(&rg, &r.values, i, j);
                    let n = d[0].hypot(d[1]);
                    redist_ok &= n > 0.7 && n < 1.3 && (r.at(i, j) - exact.at(i, j)).abs() < 0.5 * rg.h;
                }
            }
        }
    }
    if !redist_ok {
        failed.push("redistancing");
    }

    // kinetics: roots 0, 1/2, Cv with alternating signs between them
    let mut kin_ok = true;
    for &(k, c, v) in &[(100.0, 0.8, 1.0), (500.0, 0.8, 0.5), (10.0, 0.3, 1.4)] {
        let (r1, r2) = (0.5f64.min(c * v), 0.5f64.max(c * v));
        kin_ok &= reaction_f(0.0, v, k, c) == 0.0 && reaction_f(0.5, v, k, c).abs() < 1e-12;
        for n in 1..240 {
            let x = 1.2 * n as f64 / 240.0;
            if (x - r1).abs() < 1e-9 || (x - r2).abs() < 1e-9 {
                continue;
            }
            let expected = if x < r1 || x > r2 { -1.0 } else { 1.0 };
            kin_ok &= reaction_f(x, v, k, c).signum() == expected;
        }
    }
    if !kin_ok {
        failed.push("kinetics");
    }

    // restart through the snapshot text format
    let mut first = Simulation::new(cfg.clone())?;
    first.run_with(40.0 * cfg.dt, |_, _| {})?;
    let text = Snapshot::from_state(&first.state).to_text();
    let mut second = Simulation::from_state(cfg.clone(), Snapshot::parse(&text)?.into_state(cfg.mass))?;
    second.run()?;
    let full = &sim.records;
    let tail = &full[full.len() - second.records.len()..];
    let restart_ok = tail
        .iter()
        .zip(&second.records)
        .all(|(a, b)| a.t == b.t && (a.xc - b.xc).abs() < 1e-8 && (a.yc - b.yc).abs() < 1e-8);
    if !restart_ok {
        failed.push("restart");
    }

    let detail = if failed.is_empty() {
        "spd, extension, redistancing, kinetics, restart".to_string()
    } else {
        format!("failed: {}", failed.join(", "))
    };
    verdict(failed.is_empty(), detail)
}

type Criterion = fn() -> Result<Verdict>;

const CRITERIA: [(&str, Criterion); 11] = [
    ("mass_conservation", mass_conservation),
    ("curvature_flow_oracle", curvature_flow),
    ("convergence_study", convergence_study),
    ("polarization_random", polarization_random),
    ("stimulus_reversal", stimulus_reversal),
    ("straight_trajectory", straight_trajectory),
    ("circular_trajectory", circular_trajectory),
    ("diffusion_sweep", diffusion_sweep),
    ("contractility_sweep", contractility_sweep),
    ("one_vs_two_species", one_vs_two_species),
    ("property_suites", property_suites),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut passed = 0;
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = check().unwrap_or_else(|e| Verdict {
            pass: false,
            detail: format!("error: {e}"),
        });
        passed += v.pass as usize;
        println!(
            "{} {name}: {} [{:.0} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{ran} criteria passed");
}
