//! Center velocities, straight/circular classification and the
//! preparation-time metric.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsfit::solve_dense;

/// Minimum number of moving samples the classifier needs.
pub const MIN_SAMPLES: usize = 20;
/// Speed below which a sample counts as stationary.
pub const MIN_SPEED: f64 = 1e-3;
/// Heading increments against the overall turning sense up to this size
/// still count as monotone.
pub const MONOTONE_SLACK: f64 = 1e-2;

/// Central differences of `(t, x, y)` samples, one-sided at the ends.
pub fn center_velocity(t: &[f64], x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = t.len();
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    if n < 2 {
        return (vx, vy);
    }
    for k in 0..n {
        let (a, b) = match k {
            0 => (0, 1),
            _ if k == n - 1 => (n - 2, n - 1),
            _ => (k - 1, k + 1),
        };
        let dt = t[b] - t[a];
        vx[k] = (x[b] - x[a]) / dt;
        vy[k] = (y[b] - y[a]) / dt;
    }
    (vx, vy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrajectoryKind {
    Straight,
    Circular,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: TrajectoryKind,
    /// Unwrapped heading change between the first and last moving sample.
    pub heading_change: f64,
    /// Max distance from the best-fit line over the path length.
    pub lateral_ratio: f64,
    pub monotone: bool,
    /// Algebraic circle fit, reported for circular paths.
    pub radius: Option<f64>,
    pub circle_center: Option<[f64; 2]>,
    pub samples: usize,
}

/// Headings of the velocity samples, unwrapped to a continuous branch.
pub fn unwrapped_headings(vx: &[f64], vy: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(vx.len());
    for (&a, &b) in vx.iter().zip(vy) {
        let raw = b.atan2(a);
        let th = match out.last() {
            Some(&prev) => prev + wrap(raw - prev),
            None => raw,
        };
        out.push(th);
    }
    out
}

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

fn is_monotone(theta: &[f64]) -> bool {
    let total = theta.last().unwrap_or(&0.0) - theta.first().unwrap_or(&0.0);
    let s = if total >= 0.0 { 1.0 } else { -1.0 };
    theta.windows(2).all(|w| s * (w[1] - w[0]) >= -MONOTONE_SLACK)
}

/// Every heading increment turns the same way at no less than a tenth of
/// the mean rate, and the window turns by more than π/8 overall.
fn turning_steadily(theta: &[f64]) -> bool {
    let total = theta[theta.len() - 1] - theta[0];
    if total.abs() <= PI / 8.0 {
        return false;
    }
    let floor = 0.1 * total.abs() / (theta.len() - 1) as f64;
    theta.windows(2).all(|w| total.signum() * (w[1] - w[0]) >= floor)
}

/// Classify the center path after discarding samples with `t < t_skip`.
pub fn classify_trajectory(t: &[f64], x: &[f64], y: &[f64], t_skip: f64) -> Result<Classification> {
    let (vx, vy) = center_velocity(t, x, y);
    let keep: Vec<usize> = (0..t.len())
        .filter(|&k| t[k] >= t_skip && vx[k].hypot(vy[k]) > MIN_SPEED)
        .collect();
    if keep.len() < MIN_SAMPLES {
        return Err(Error::TooShort {
            samples: keep.len(),
            needed: MIN_SAMPLES,
        });
    }
    let px: Vec<f64> = keep.iter().map(|&k| x[k]).collect();
    let py: Vec<f64> = keep.iter().map(|&k| y[k]).collect();
    let theta = unwrapped_headings(
        &keep.iter().map(|&k| vx[k]).collect::<Vec<_>>(),
        &keep.iter().map(|&k| vy[k]).collect::<Vec<_>>(),
    );
    let heading_change = theta[theta.len() - 1] - theta[0];
    let monotone = is_monotone(&theta);
    let lateral_ratio = lateral_deviation_ratio(&px, &py);

    let (kind, radius, circle_center) = if heading_change.abs() < PI / 4.0 && lateral_ratio < 0.05 {
        (TrajectoryKind::Straight, None, None)
    } else if monotone && heading_change.abs() >= 1.5 * PI {
        match fit_circle(&px, &py) {
            Some((c, r)) => (TrajectoryKind::Circular, Some(r), Some(c)),
            None => (TrajectoryKind::Undetermined, None, None),
        }
    } else {
        (TrajectoryKind::Undetermined, None, None)
    };
    Ok(Classification {
        kind,
        heading_change,
        lateral_ratio,
        monotone,
        radius,
        circle_center,
        samples: keep.len(),
    })
}

/// Max perpendicular distance to the total-least-squares line divided by
/// the polyline length.
pub fn lateral_deviation_ratio(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let (dx, dy) = (angle.cos(), angle.sin());
    let dev = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| ((a - mx) * dy - (b - my) * dx).abs())
        .fold(0.0, f64::max);
    let len: f64 = x
        .windows(2)
        .zip(y.windows(2))
        .map(|(a, b)| (a[1] - a[0]).hypot(b[1] - b[0]))
        .sum();
    if len > 0.0 {
        dev / len
    } else {
        f64::INFINITY
    }
}

/// Algebraic (Kåsa) circle fit: minimizes `Σ (x² + y² + D x + E y + F)²`.
pub fn fit_circle(x: &[f64], y: &[f64]) -> Option<([f64; 2], f64)> {
    if x.len() < 3 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (&a, &b) in x.iter().zip(y) {
        let (a, b) = (a - mx, b - my);
        let row = [a, b, 1.0];
        let rhs = -(a * a + b * b);
        for r in 0..3 {
            atb[r] += row[r] * rhs;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let scale = (0..3).map(|r| ata[r][r]).fold(0.0, f64::max);
    let [d, e, f] = solve_dense(ata, atb, 1e-12 * scale)?;
    let cx = -0.5 * d;
    let cy = -0.5 * e;
    let r2 = cx * cx + cy * cy - f;
    (r2 > 0.0).then(|| ([cx + mx, cy + my], r2.sqrt()))
}

/// Start of the first window of `window` time units over which the heading
/// either stays within π/8 of its mean (straight) or turns monotonically
/// (circular), depending on `kind`. `None` if no such window exists.
pub fn preparation_time(t: &[f64], x: &[f64], y: &[f64], kind: TrajectoryKind, window: f64) -> Option<f64> {
    let (vx, vy) = center_velocity(t, x, y);
    let theta = unwrapped_headings(&vx, &vy);
    let n = t.len();
    let mut end = 0;
    for s in 0..n {
        while end < n && t[end] <= t[s] + window + 1e-9 {
            end += 1;
        }
        if t[end - 1] < t[s] + window - 1e-9 {
            return None;
        }
        if (s..end).any(|k| vx[k].hypot(vy[k]) <= MIN_SPEED) {
            continue;
        }
        let w = &theta[s..end];
        let ok = match kind {
            TrajectoryKind::Straight => {
                let mean = w.iter().sum::<f64>() / w.len() as f64;
                w.iter().all(|th| (th - mean).abs() <= PI / 8.0)
            }
            TrajectoryKind::Circular => turning_steadily(w),
            TrajectoryKind::Undetermined => false,
        };
        if ok {
            return Some(t[s]);
        }
    }
    None
}
