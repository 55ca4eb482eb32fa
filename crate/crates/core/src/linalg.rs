//! Compressed sparse row storage and the two preconditioned Krylov solvers
//! used by the simulator: conjugate gradients with a zero-fill incomplete
//! Cholesky factor for the symmetric diffusion systems, and BiCGSTAB with a
//! zero-fill incomplete LU factor for the level-set system.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    symmetric: bool,
}

impl CsrMatrix {
    /// Build from `(row, col, value)` triplets. Duplicates are summed,
    /// resulting zeros are dropped, and the symmetry flag is set only when
    /// the stored matrix equals its transpose exactly.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) out of range for n = {n}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        let mut m = CsrMatrix {
            n,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
            symmetric: false,
        };
        m.symmetric = m.is_exactly_symmetric();
        m
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[span.clone()].binary_search(&c) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    fn is_exactly_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| self.get(c, r) == v))
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n];
        self.mul_vec(x, &mut ax);
        ax.iter()
            .zip(b)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Target relative residual `||Ax - b|| / ||b||`.
    pub tol: f64,
    /// Iteration cap; `None` means `10 n`.
    pub max_iter: Option<usize>,
    pub precondition: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: None,
            precondition: true,
        }
    }
}

impl SolveOptions {
    fn cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Zero-fill incomplete Cholesky factor `L` (lower triangle including the
/// diagonal) with `A ~ L L^T`. Falls back to Jacobi scaling when a pivot
/// breaks down.
#[derive(Debug, Clone)]
pub enum SymmetricPreconditioner {
    Identity,
    Jacobi(Vec<f64>),
    Cholesky {
        row_ptr: Vec<usize>,
        cols: Vec<usize>,
        vals: Vec<f64>,
    },
}

impl SymmetricPreconditioner {
    pub fn incomplete_cholesky(a: &CsrMatrix) -> Self {
        let n = a.n;
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for i in 0..n {
            for (c, v) in a.row(i) {
                if c <= i {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr[i + 1] = cols.len();
        }
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            if end == start || cols[end - 1] != i {
                return SymmetricPreconditioner::jacobi(a);
            }
            for p in start..end {
                let k = cols[p];
                // dot of rows i and k over columns < k
                let mut s = vals[p];
                let (ks, ke) = (row_ptr[k], row_ptr[k + 1]);
                let (mut pi, mut pk) = (start, ks);
                while pi < p && pk < ke {
                    let (ci, ck) = (cols[pi], cols[pk]);
                    if ck >= k {
                        break;
                    }
                    match ci.cmp(&ck) {
                        std::cmp::Ordering::Less => pi += 1,
                        std::cmp::Ordering::Greater => pk += 1,
                        std::cmp::Ordering::Equal => {
                            s -= vals[pi] * vals[pk];
                            pi += 1;
                            pk += 1;
                        }
                    }
                }
                if k < i {
                    vals[p] = s / vals[ke - 1];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return SymmetricPreconditioner::jacobi(a);
                    }
                    vals[p] = s.sqrt();
                }
            }
        }
        SymmetricPreconditioner::Cholesky {
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn jacobi(a: &CsrMatrix) -> Self {
        let d = a.diagonal();
        if d.iter().all(|&x| x > 0.0) {
            SymmetricPreconditioner::Jacobi(d.iter().map(|x| 1.0 / x).collect())
        } else {
            SymmetricPreconditioner::Identity
        }
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            SymmetricPreconditioner::Identity => z.copy_from_slice(r),
            SymmetricPreconditioner::Jacobi(inv) => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(inv) {
                    *z = r * d;
                }
            }
            SymmetricPreconditioner::Cholesky {
                row_ptr,
                cols,
                vals,
            } => {
                let n = r.len();
                // L y = r
                for i in 0..n {
                    let mut s = r[i];
                    let end = row_ptr[i + 1] - 1;
                    for p in row_ptr[i]..end {
                        s -= vals[p] * z[cols[p]];
                    }
                    z[i] = s / vals[end];
                }
                // L^T z = y, column sweep over the rows of L
                for i in (0..n).rev() {
                    let end = row_ptr[i + 1] - 1;
                    z[i] /= vals[end];
                    let zi = z[i];
                    for p in row_ptr[i]..end {
                        z[cols[p]] -= vals[p] * zi;
                    }
                }
            }
        }
    }
}

/// Zero-fill incomplete LU factor stored in the pattern of `A`; unit lower
/// triangle implied.
#[derive(Debug, Clone)]
pub struct IncompleteLu {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<usize>,
}

impl IncompleteLu {
    /// `None` when a zero pivot is met or the diagonal is not stored.
    pub fn new(a: &CsrMatrix) -> Option<Self> {
        let n = a.n;
        let row_ptr = a.row_ptr.clone();
        let cols = a.cols.clone();
        let mut vals = a.vals.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                if cols[p] == i {
                    diag[i] = p;
                }
            }
            if diag[i] == usize::MAX {
                return None;
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for p in row_ptr[i]..row_ptr[i + 1] {
                pos[cols[p]] = p;
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                let k = cols[p];
                if k >= i {
                    break;
                }
                let pivot = vals[diag[k]];
                if pivot == 0.0 {
                    return None;
                }
                let lik = vals[p] / pivot;
                vals[p] = lik;
                for q in diag[k] + 1..row_ptr[k + 1] {
                    let target = pos[cols[q]];
                    if target != usize::MAX {
                        vals[target] -= lik * vals[q];
                    }
                }
            }
            for p in row_ptr[i]..row_ptr[i + 1] {
                pos[cols[p]] = usize::MAX;
            }
            if vals[diag[i]] == 0.0 || !vals[diag[i]].is_finite() {
                return None;
            }
        }
        Some(IncompleteLu {
            row_ptr,
            cols,
            vals,
            diag,
        })
    }

    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        for i in 0..n {
            let mut s = r[i];
            for p in self.row_ptr[i]..self.diag[i] {
                s -= self.vals[p] * z[self.cols[p]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for p in self.diag[i] + 1..self.row_ptr[i + 1] {
                s -= self.vals[p] * z[self.cols[p]];
            }
            z[i] = s / self.vals[self.diag[i]];
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Power-of-two factor bringing `bnorm` near one when it is far enough
/// from one for dot products to under- or overflow.
fn rescale(bnorm: f64) -> Option<f64> {
    if (1e-100..=1e100).contains(&bnorm) || !bnorm.is_finite() {
        return None;
    }
    Some(2f64.powi(-bnorm.log2().round() as i32))
}

fn scaled(
    b: &[f64],
    x: &mut [f64],
    scale: f64,
    solve: impl FnOnce(&[f64], &mut [f64]) -> Result<SolveStats>,
) -> Result<SolveStats> {
    let bs: Vec<f64> = b.iter().map(|v| v * scale).collect();
    x.iter_mut().for_each(|v| *v *= scale);
    let out = solve(&bs, x);
    x.iter_mut().for_each(|v| *v /= scale);
    out
}

/// Preconditioned conjugate gradients for symmetric positive-definite `A`.
/// `x` holds the initial guess on entry and the best iterate on return.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: &SolveOptions) -> Result<SolveStats> {
    let pre = if opts.precondition {
        SymmetricPreconditioner::incomplete_cholesky(a)
    } else {
        SymmetricPreconditioner::Identity
    };
    solve_spd_with(a, &pre, b, x, opts)
}

pub fn solve_spd_with(
    a: &CsrMatrix,
    pre: &SymmetricPreconditioner,
    b: &[f64],
    x: &mut [f64],
    opts: &SolveOptions,
) -> Result<SolveStats> {
    let n = a.n;
    if n == 0 {
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    if let Some(scale) = rescale(bnorm) {
        return scaled(b, x, scale, |b, x| solve_spd_with(a, pre, b, x, opts));
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= opts.tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: rel,
        });
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let cap = opts.cap(n);
    for it in 1..=cap {
        a.mul_vec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rz / pq;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * q[k];
        }
        rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            break;
        }
        if rel <= opts.tol {
            return Ok(SolveStats {
                iterations: it,
                residual: a.residual_norm(x, b) / bnorm,
            });
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverDiverged {
        iterations: cap,
        residual: rel,
    })
}

/// BiCGSTAB with right ILU(0) preconditioning for nonsymmetric `A`.
/// `x` holds the initial guess on entry and the best iterate on return.
pub fn solve_nonsymmetric(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    opts: &SolveOptions,
) -> Result<SolveStats> {
    let ilu = if opts.precondition {
        IncompleteLu::new(a)
    } else {
        None
    };
    solve_nonsymmetric_with(a, ilu.as_ref(), b, x, opts)
}

pub fn solve_nonsymmetric_with(
    a: &CsrMatrix,
    ilu: Option<&IncompleteLu>,
    b: &[f64],
    x: &mut [f64],
    opts: &SolveOptions,
) -> Result<SolveStats> {
    let n = a.n;
    if n == 0 {
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats {
            iterations: 0,
            residual: 0.0,
        });
    }
    if let Some(scale) = rescale(bnorm) {
        return scaled(b, x, scale, |b, x| solve_nonsymmetric_with(a, ilu, b, x, opts));
    }
    let precond = |src: &[f64], dst: &mut [f64]| match ilu {
        Some(f) => f.apply(src, dst),
        None => dst.copy_from_slice(src),
    };

    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = norm(&r) / bnorm;
    let mut best = x.to_vec();
    let mut best_rel = rel;
    if rel <= opts.tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: rel,
        });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0f64, 1.0f64, 1.0f64);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let cap = opts.cap(n);
    let mut it = 0;
    while it < cap {
        it += 1;
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
        }
        precond(&p, &mut p_hat);
        a.mul_vec(&p_hat, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            break;
        }
        alpha = rho / rv;
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        let srel = norm(&s) / bnorm;
        if srel <= opts.tol {
            for k in 0..n {
                x[k] += alpha * p_hat[k];
            }
            return Ok(SolveStats {
                iterations: it,
                residual: a.residual_norm(x, b) / bnorm,
            });
        }
        precond(&s, &mut s_hat);
        a.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            break;
        }
        omega = dot(&t, &s) / tt;
        for k in 0..n {
            x[k] += alpha * p_hat[k] + omega * s_hat[k];
            r[k] = s[k] - omega * t[k];
        }
        rel = norm(&r) / bnorm;
        if !rel.is_finite() {
            break;
        }
        if rel < best_rel {
            best_rel = rel;
            best.copy_from_slice(x);
        }
        if rel <= opts.tol {
            return Ok(SolveStats {
                iterations: it,
                residual: a.residual_norm(x, b) / bnorm,
            });
        }
    }
    x.copy_from_slice(&best);
    Err(Error::SolverDiverged {
        iterations: it,
        residual: best_rel,
    })
}
