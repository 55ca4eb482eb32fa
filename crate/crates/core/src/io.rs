//! Diagnostics CSV and plain-text field snapshots.
//!
//! Snapshot layout: a header line `nx ny h ox oy t world_offset_x
//! world_offset_y`, then `ny` lines of node values of phi, then
//! `ny - 1` lines each of cell values of `u` and `v`. Cells outside the
//! region hold `nan`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::driver::{Record, SimState};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::levelset::LevelSetField;
use crate::reaction_diffusion::ConcentrationState;

pub const TIMESERIES_HEADER: [&str; 9] = ["t", "U", "V", "mass", "area", "xc", "yc", "vx", "vy"];

pub fn write_timeseries_to<W: Write>(out: W, records: &[Record]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(TIMESERIES_HEADER).map_err(fmt)?;
    for r in records {
        w.serialize(r).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_timeseries(path: &Path, records: &[Record]) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_timeseries_to(std::io::BufWriter::new(f), records)
}

pub fn read_timeseries_from<R: std::io::Read>(input: R) -> Result<Vec<Record>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(|e| Error::Format(e.to_string()))?;
    if header.iter().ne(TIMESERIES_HEADER.iter().copied()) {
        return Err(Error::Format(format!(
            "expected header {}, found {}",
            TIMESERIES_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    rd.deserialize()
        .map(|r| r.map_err(|e: csv::Error| Error::Format(e.to_string())))
        .collect()
}

pub fn read_timeseries(path: &Path) -> Result<Vec<Record>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_timeseries_from(std::io::BufReader::new(f))
}

/// Node and cell fields of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub t: f64,
    pub offset: [f64; 2],
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl Snapshot {
    pub fn from_state(s: &SimState) -> Self {
        Snapshot {
            grid: s.phi.grid,
            t: s.t,
            offset: s.offset,
            phi: s.phi.values.clone(),
            u: s.conc.u.clone(),
            v: s.conc.v.clone(),
        }
    }

    pub fn into_state(self, mass: f64) -> SimState {
        SimState {
            t: self.t,
            phi: LevelSetField {
                grid: self.grid,
                values: self.phi,
            },
            conc: ConcentrationState {
                u: self.u,
                v: self.v,
                mass,
            },
            offset: self.offset,
        }
    }

    /// Fails with `DimensionMismatch` unless the snapshot lives on `grid`.
    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if (self.grid.nx, self.grid.ny, self.grid.h) != (grid.nx, grid.ny, grid.h) {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{} nodes, h = {}", grid.nx, grid.ny, grid.h),
                found: format!("{}x{} nodes, h = {}", self.grid.nx, self.grid.ny, self.grid.h),
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = String::with_capacity(24 * (g.node_count() + 2 * g.cell_count()));
        let _ = writeln!(
            s,
            "{} {} {:?} {:?} {:?} {:?} {:?} {:?}",
            g.nx, g.ny, g.h, g.origin[0], g.origin[1], self.t, self.offset[0], self.offset[1]
        );
        let mut rows = |vals: &[f64], width: usize| {
            for row in vals.chunks(width) {
                let line: Vec<String> = row.iter().map(|&x| fmt_value(x)).collect();
                s.push_str(&line.join(" "));
                s.push('\n');
            }
        };
        rows(&self.phi, g.nx);
        rows(&self.u, g.cells_x());
        rows(&self.v, g.cells_x());
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty snapshot".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 8 {
            return Err(Error::Format(format!("snapshot header has {} fields, expected 8", f.len())));
        }
        let bad = |what: &str| Error::Format(format!("snapshot header: invalid {what}"));
        let nx: usize = f[0].parse().map_err(|_| bad("nx"))?;
        let ny: usize = f[1].parse().map_err(|_| bad("ny"))?;
        let num = |k: usize, what: &str| f[k].parse::<f64>().map_err(|_| bad(what));
        let grid = Grid::new(nx, ny, num(2, "h")?, [num(3, "ox")?, num(4, "oy")?])
            .map_err(|e| Error::Format(format!("snapshot header: {e}")))?;
        let t = num(5, "t")?;
        let offset = [num(6, "world_offset_x")?, num(7, "world_offset_y")?];

        let mut block = |rows: usize, width: usize, name: &str| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(rows * width);
            for r in 0..rows {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("snapshot truncated in {name} row {r}")))?;
                let before = out.len();
                for tok in line.split_whitespace() {
                    out.push(
                        tok.parse::<f64>()
                            .map_err(|_| Error::Format(format!("bad number {tok:?} in {name} row {r}")))?,
                    );
                }
                if out.len() - before != width {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{width} values in {name} row {r}"),
                        found: (out.len() - before).to_string(),
                    });
                }
            }
            Ok(out)
        };
        let phi = block(ny, nx, "phi")?;
        let u = block(ny - 1, nx - 1, "u")?;
        let v = block(ny - 1, nx - 1, "v")?;
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Format("trailing data after snapshot".into()));
        }
        Ok(Snapshot {
            grid,
            t,
            offset,
            phi,
            u,
            v,
        })
    }
}

fn fmt_value(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    fs::write(path, snap.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Snapshot::parse(&text)
}
