use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wavepin::config::{self, PRESETS};
use wavepin::convergence::{self, Refined};
use wavepin::driver::{SimState, Simulation, SimulationConfig};
use wavepin::io::{self, Snapshot};
use wavepin::trajectory::{classify_trajectory, preparation_time, TrajectoryKind};
use wavepin::{Error, Result};

#[derive(Parser)]
#[command(name = "wavepin", version, about = "Moving-cell wave-pinning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file or a preset name.
    Run {
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the random seed of every case.
        #[arg(long)]
        seed: Option<u64>,
        /// Write a field snapshot every T time units.
        #[arg(long, value_name = "T")]
        snapshot_every: Option<f64>,
        /// Continue from a snapshot written by an earlier run.
        #[arg(long, value_name = "SNAPSHOT")]
        restart: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// List the built-in presets.
    Presets,
    /// Classify the center trajectory of a diagnostics CSV.
    Classify {
        csv: PathBuf,
        /// Ignore samples before this time.
        #[arg(long, default_value_t = 0.0)]
        t_skip: f64,
        /// Window for the preparation-time metric.
        #[arg(long, default_value_t = 5.0)]
        window: f64,
    },
    /// Run every case of a configuration and report refinement orders.
    Convergence {
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            snapshot_every,
            restart,
            quiet,
        } => cmd_run(&config, &out, seed, snapshot_every, restart.as_deref(), quiet).map(|_| ()),
        Command::Presets => {
            for (name, about) in PRESETS {
                println!("{name:<24} {about}");
            }
            Ok(())
        }
        Command::Classify { csv, t_skip, window } => cmd_classify(&csv, t_skip, window),
        Command::Convergence { config, out, quiet } => cmd_convergence(&config, &out, quiet),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn load_cases(arg: &str) -> Result<Vec<SimulationConfig>> {
    let path = Path::new(arg);
    if !path.is_file() && PRESETS.iter().any(|p| p.0 == arg) {
        return config::preset_cases(arg);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    config::parse_config_cases(&text)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.into(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn cmd_run(
    arg: &str,
    out: &Path,
    seed: Option<u64>,
    snapshot_every: Option<f64>,
    restart: Option<&Path>,
    quiet: bool,
) -> Result<Vec<SimState>> {
    let mut cases = load_cases(arg)?;
    if let Some(s) = seed {
        cases.iter_mut().for_each(|c| c.seed = s);
    }
    if restart.is_some() && cases.len() > 1 {
        return Err(Error::Validation(vec!["--restart needs a single-case configuration".into()]));
    }
    if let Some(t) = snapshot_every {
        if !(t > 0.0) {
            return Err(Error::Validation(vec![format!("--snapshot-every must be positive, got {t}")]));
        }
    }
    let multi = cases.len() > 1;
    let mut finals = Vec::with_capacity(cases.len());
    let mut first_error = None;
    for cfg in cases {
        let dir = if multi { out.join(&cfg.name) } else { out.to_path_buf() };
        let name = cfg.name.clone();
        match run_case(cfg, &dir, snapshot_every, restart, quiet) {
            Ok(s) => finals.push(s),
            Err(e) if multi => {
                eprintln!("error: {name}: {e}");
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(finals),
    }
}

fn run_case(
    cfg: SimulationConfig,
    dir: &Path,
    snapshot_every: Option<f64>,
    restart: Option<&Path>,
    quiet: bool,
) -> Result<SimState> {
    create_dir(dir)?;
    write_text(&dir.join("config.toml"), &config::to_toml(&cfg)?)?;
    let mut sim = match restart {
        Some(path) => {
            let snap = io::read_snapshot(path)?;
            snap.check_grid(&cfg.grid()?)?;
            Simulation::from_state(cfg, snap.into_state(0.0))?
        }
        None => Simulation::new(cfg)?,
    };
    let dt = sim.config.dt;
    let t_final = sim.config.t_final;
    let snap_stride = snapshot_every.map(|t| ((t / dt).round() as usize).max(1));
    let total = (t_final / dt).round() as usize;
    let report = (total / 20).max(1);
    if !quiet {
        eprintln!("{}: {} steps to t = {}", sim.config.name, total.saturating_sub(sim.step_index), t_final);
    }

    let mut failure = None;
    while sim.step_index < total {
        if let Err(e) = sim.step() {
            failure = Some(e);
            break;
        }
        let k = sim.step_index;
        if let Some(s) = snap_stride {
            if k % s == 0 {
                io::write_snapshot(&dir.join(format!("snapshot_{k:08}.txt")), &Snapshot::from_state(&sim.state))?;
            }
        }
        if !quiet && k % report == 0 {
            if let Some(r) = sim.records.last() {
                eprintln!(
                    "  t = {:8.3}  area {:.4}  U+V {:.12}  center ({:.4}, {:.4})",
                    sim.state.t, r.area, r.mass, r.xc, r.yc
                );
            }
        }
    }
    io::write_timeseries(&dir.join("timeseries.csv"), &sim.diagnostics())?;
    if let Some(e) = failure {
        let path = dir.join("failure_state.txt");
        io::write_snapshot(&path, &Snapshot::from_state(&sim.state))?;
        return Err(match e {
            Error::Step { step, t, source, .. } => Error::Step {
                step,
                t,
                dump: Some(path),
                source,
            },
            other => other,
        });
    }
    io::write_snapshot(&dir.join("final.txt"), &Snapshot::from_state(&sim.state))?;
    Ok(sim.state)
}

fn cmd_classify(csv: &Path, t_skip: f64, window: f64) -> Result<()> {
    let records = io::read_timeseries(csv)?;
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let x: Vec<f64> = records.iter().map(|r| r.xc).collect();
    let y: Vec<f64> = records.iter().map(|r| r.yc).collect();
    let c = classify_trajectory(&t, &x, &y, t_skip)?;
    println!("kind            {:?}", c.kind);
    println!("samples         {}", c.samples);
    println!("heading change  {:.6} rad", c.heading_change);
    println!("lateral ratio   {:.6e}", c.lateral_ratio);
    println!("monotone        {}", c.monotone);
    if let (Some(r), Some([cx, cy])) = (c.radius, c.circle_center) {
        println!("circle          radius {r:.6} center ({cx:.6}, {cy:.6})");
    }
    for kind in [TrajectoryKind::Straight, TrajectoryKind::Circular] {
        match preparation_time(&t, &x, &y, kind, window) {
            Some(tp) => println!("preparation     {kind:?}: {tp:.4}"),
            None => println!("preparation     {kind:?}: none"),
        }
    }
    Ok(())
}

fn cmd_convergence(arg: &str, out: &Path, quiet: bool) -> Result<()> {
    let cases = load_cases(arg)?;
    if cases.len() < 3 {
        return Err(Error::Validation(vec![format!(
            "a refinement study needs at least 3 cases, got {}",
            cases.len()
        )]));
    }
    let mut finals = Vec::with_capacity(cases.len());
    for cfg in &cases {
        finals.push(run_case(cfg.clone(), &out.join(&cfg.name), None, None, quiet)?);
    }
    let mut table = String::from("refined,value,distance_to_next,order\n");
    for s in convergence::studies(&cases, &finals) {
        let label = match s.refined {
            Refined::TimeStep => "dt",
            Refined::GridSize => "h",
        };
        println!("{label} refinement: {:?}", s.values);
        for (k, v) in s.values.iter().enumerate() {
            let d = s.distances.get(k).map_or(String::new(), |d| format!("{d:e}"));
            let p = s.orders.get(k).map_or(String::new(), |p| format!("{p:.4}"));
            println!("  {label} = {v:<10} distance {d:<24} order {p}");
            table.push_str(&format!("{label},{v},{d},{p}\n"));
        }
        println!("  monotone: {}", s.monotone());
    }
    write_text(&out.join("convergence.csv"), &table)
}
