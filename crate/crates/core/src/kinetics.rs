//! Reaction term, time-gated stimulus and parameter rescaling.

use serde::{Deserialize, Serialize};

/// Nondimensional model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub d_u: f64,
    pub d_v: f64,
    /// Reaction rate.
    pub k: f64,
    /// Interconversion parameter.
    pub c: f64,
    /// Surface tension.
    pub chi: f64,
    /// Contractility threshold.
    pub u_star: f64,
    /// Total amount of protein.
    pub mass: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            d_u: 0.1,
            d_v: 10.0,
            k: 100.0,
            c: 0.8,
            chi: 0.2,
            u_star: 0.2,
            mass: 6.0,
        }
    }
}

/// Typical ranges of the rescaled parameters for motile cells.
pub const TYPICAL_RANGES: [(&str, f64, f64); 6] = [
    ("D_u", 0.1, 0.5),
    ("D_v", 10.0, 50.0),
    ("K", 100.0, 500.0),
    ("chi", 0.1, 0.3),
    ("u_star", 0.2, 0.45),
    ("M", 6.0, 8.0),
];

impl Params {
    /// Hard constraints. `K = 0` and `chi = 0` are accepted so that kinetics
    /// or surface tension can be switched off.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("D_u", self.d_u),
            ("D_v", self.d_v),
            ("u_star", self.u_star),
            ("M", self.mass),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} = {v} must be positive"));
            }
        }
        for (name, v) in [("K", self.k), ("chi", self.chi)] {
            if !(v >= 0.0 && v.is_finite()) {
                out.push(format!("{name} = {v} must be non-negative"));
            }
        }
        if !(self.c > 0.0 && self.c <= 1.0) {
            out.push(format!("C = {} must lie in (0, 1]", self.c));
        }
        out
    }

    /// Parameters outside their typical range (informational only).
    pub fn warnings(&self) -> Vec<String> {
        let vals = [self.d_u, self.d_v, self.k, self.chi, self.u_star, self.mass];
        TYPICAL_RANGES
            .iter()
            .zip(vals)
            .filter(|((_, lo, hi), v)| v < lo || v > hi)
            .map(|((name, lo, hi), v)| format!("{name} = {v} outside typical range [{lo}, {hi}]"))
            .collect()
    }
}

/// `f(u, v) = -K u (u - 0.5)(u - C v)`.
#[inline]
pub fn reaction_f(u: f64, v: f64, k: f64, c: f64) -> f64 {
    -k * u * (u - 0.5) * (u - c * v)
}

/// Two-window graded stimulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusConfig {
    pub enabled: bool,
    pub amplitude: f64,
    pub window1: [f64; 2],
    pub window2: [f64; 2],
}

impl Default for StimulusConfig {
    fn default() -> Self {
        StimulusConfig {
            enabled: false,
            amplitude: 0.07,
            window1: [0.0, 1.0],
            window2: [10.0, 11.0],
        }
    }
}

impl StimulusConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.amplitude >= 0.0) {
            out.push(format!("stimulus amplitude {} must be non-negative", self.amplitude));
        }
        for w in [self.window1, self.window2] {
            if !(w[1] > w[0]) {
                out.push(format!("stimulus window {w:?} is empty"));
            }
        }
        if self.window1[1] >= self.window2[0] && self.window2[1] >= self.window1[0] {
            out.push("stimulus windows overlap".to_string());
        }
        out
    }
}

/// Constant on the first half of a window, then a linear ramp to zero.
fn window_profile(t: f64, window: [f64; 2], amplitude: f64) -> f64 {
    let [start, end] = window;
    if t < start || t > end {
        return 0.0;
    }
    let mid = 0.5 * (start + end);
    if t <= mid {
        amplitude
    } else {
        amplitude * (1.0 - (t - mid) / (end - mid))
    }
}

/// Rate coefficient `S(x, y, t)` of the conversion `v -> u`.
pub fn stimulus(x: f64, y: f64, t: f64, cfg: &StimulusConfig) -> f64 {
    if !cfg.enabled {
        return 0.0;
    }
    let inside = |w: [f64; 2]| t >= w[0] && t <= w[1];
    if inside(cfg.window1) {
        window_profile(t, cfg.window1, cfg.amplitude) * (1.3 - y) * (0.7 - x)
    } else if inside(cfg.window2) {
        window_profile(t, cfg.window2, cfg.amplitude) * (y + 1.3) * (x + 0.7)
    } else {
        0.0
    }
}

/// Dimensional parameter set (micrometres, seconds, piconewtons).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionalParams {
    /// µm²/s
    pub d_u: f64,
    /// µm²/s
    pub d_v: f64,
    /// F-actin extension coefficient, pN/µm.
    pub alpha: f64,
    /// Myosin retraction coefficient, pN/µm.
    pub beta: f64,
    /// Friction, pN·s/µm².
    pub tau: f64,
    /// Surface tension, pN.
    pub gamma: f64,
    /// Relative reaction rate, 1/s.
    pub k: f64,
    /// Front concentration scale.
    pub c: f64,
    pub big_c: f64,
    /// Typical speed, µm/s.
    pub v0: f64,
    /// Typical radius, µm.
    pub r: f64,
    /// Total amount of protein, concentration × area.
    pub n_tot: f64,
}

impl Default for DimensionalParams {
    fn default() -> Self {
        DimensionalParams {
            d_u: 1.0,
            d_v: 100.0,
            alpha: 0.1,
            beta: 0.2,
            tau: 2.62,
            gamma: 1.0,
            k: 0.01,
            c: 10.0,
            big_c: 0.8,
            v0: 0.1,
            r: 10.0,
            n_tot: 60000.0,
        }
    }
}

/// Rescale by the typical speed and radius. Returns the rescaled parameters
/// and a list of out-of-range warnings.
pub fn nondimensionalize(dp: &DimensionalParams) -> (Params, Vec<String>) {
    let p = Params {
        d_u: dp.d_u / (dp.v0 * dp.r),
        d_v: dp.d_v / (dp.v0 * dp.r),
        k: dp.k * dp.r * dp.c * dp.c / dp.v0,
        c: dp.big_c,
        chi: dp.gamma / (dp.v0 * dp.tau * dp.r),
        u_star: dp.beta / (dp.c * dp.alpha),
        mass: dp.n_tot / (dp.c * dp.r * dp.r),
    };
    let w = p.warnings();
    (p, w)
}
