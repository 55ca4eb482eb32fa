//! Local least-squares polynomial reconstruction shared by the interface
//! sampler and the new-cell extrapolation.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    Quadratic,
    Linear,
    Nearest,
}

/// Value at `target` reconstructed from scattered `(point, value)` samples.
///
/// Tries a quadratic least-squares fit (needs 6 samples), then a linear one
/// (needs 3), then the nearest sample. A fit is rejected when the matrix is
/// numerically singular or when its value leaves the sample range widened by
/// the range on each side; a quadratic value must also stay within half the
/// range of the linear one.
pub fn reconstruct(samples: &[([f64; 2], f64)], target: [f64; 2], h: f64) -> Option<(f64, FitKind)> {
    if samples.is_empty() {
        return None;
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.1), hi.max(s.1)));
    if hi - lo == 0.0 {
        let kind = match samples.len() {
            n if n >= 6 => FitKind::Quadratic,
            n if n >= 3 => FitKind::Linear,
            _ => FitKind::Nearest,
        };
        return Some((lo, kind));
    }
    let range = hi - lo;
    let plausible = |v: f64| v.is_finite() && v >= lo - range && v <= hi + range;

    let linear = if samples.len() >= 3 {
        fit::<3>(samples, target, h, |x, y| [1.0, x, y]).filter(|&v| plausible(v))
    } else {
        None
    };
    if samples.len() >= 6 {
        if let Some(v) = fit::<6>(samples, target, h, |x, y| [1.0, x, y, x * x, x * y, y * y]) {
            let agrees = linear.map_or(true, |l| (v - l).abs() <= 0.5 * range);
            if plausible(v) && agrees {
                return Some((v, FitKind::Quadratic));
            }
        }
    }
    if let Some(v) = linear {
        return Some((v, FitKind::Linear));
    }
    let nearest = samples
        .iter()
        .min_by(|a, b| dist2(a.0, target).total_cmp(&dist2(b.0, target)))
        .map(|s| s.1)?;
    Some((nearest, FitKind::Nearest))
}

#[inline]
fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Least-squares fit in coordinates centered at `target` and scaled by `h`;
/// the value at the target is the constant coefficient.
fn fit<const N: usize>(
    samples: &[([f64; 2], f64)],
    target: [f64; 2],
    h: f64,
    basis: impl Fn(f64, f64) -> [f64; N],
) -> Option<f64> {
    let mut ata = [[0.0; N]; N];
    let mut atb = [0.0; N];
    for &(p, val) in samples {
        let b = basis((p[0] - target[0]) / h, (p[1] - target[1]) / h);
        for r in 0..N {
            atb[r] += b[r] * val;
            for c in 0..N {
                ata[r][c] += b[r] * b[c];
            }
        }
    }
    let scale = (0..N).map(|r| ata[r][r]).fold(0.0, f64::max);
    let coef = solve_dense(ata, atb, 1e-10 * scale)?;
    Some(coef[0])
}

/// Gaussian elimination with partial pivoting; `None` if a pivot falls
/// below `pivot_tol`.
pub(crate) fn solve_dense<const N: usize>(
    mut a: [[f64; N]; N],
    mut b: [f64; N],
    pivot_tol: f64,
) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if !(a[piv][col].abs() > pivot_tol) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..N {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = [0.0; N];
    for r in (0..N).rev() {
        let mut s = b[r];
        for c in r + 1..N {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}
