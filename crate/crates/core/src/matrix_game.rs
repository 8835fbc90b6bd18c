//! Zero-sum matrix games: the row player maximizes `x^T A y`.
//!
//! [`solve`] shifts the matrix to positive entries and runs a dense tableau
//! simplex with Bland's rule, so identical inputs always give identical
//! strategies. Every solution carries a certificate computed on the original
//! matrix.

use alloc::vec;
use alloc::vec::Vec;

use crate::game::MixedAction;
use crate::{Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, found: data.len() });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Precondition("matrix rows have different lengths"));
        }
        Self::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `x^T A`, one entry per column.
    pub fn row_mix(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += xi * a;
                }
            }
        }
        out
    }

    /// `A y`, one entry per row.
    pub fn col_mix(&self, y: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(y).map(|(a, b)| a * b).sum()).collect()
    }

    fn min_max(&self) -> (f64, f64) {
        self.data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Optimal strategies with a two-sided certificate.
///
/// `lower = min_j (x^T A)_j` and `upper = max_i (A y)_i` bracket the true
/// value; `value` is their midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixGameSolution {
    pub value: f64,
    pub x_star: MixedAction,
    pub y_star: MixedAction,
    pub lower: f64,
    pub upper: f64,
}

impl MatrixGameSolution {
    /// Most the row player gains by deviating from `x_star` against `y_star`.
    pub fn row_gain(&self) -> f64 {
        self.upper - self.value
    }

    /// Most the column player gains by deviating from `y_star`.
    pub fn col_gain(&self) -> f64 {
        self.value - self.lower
    }

    /// Largest certificate residual.
    pub fn residual(&self) -> f64 {
        self.row_gain().max(self.col_gain())
    }
}

const PIVOT_EPS: f64 = 1e-13;
const MAX_PIVOTS: usize = 100_000;

/// Solves the game with certificate tolerance `tol`.
pub fn solve(a: &Matrix, tol: f64) -> Result<MatrixGameSolution> {
    let (nr, nc) = (a.rows, a.cols);
    let (x, y) = if nc == 1 {
        let i = argbest(nr, |i| a.get(i, 0), |v, b| v > b);
        (MixedAction::pure(nr, i), MixedAction::pure(1, 0))
    } else if nr == 1 {
        let j = argbest(nc, |j| a.get(0, j), |v, b| v < b);
        (MixedAction::pure(1, 0), MixedAction::pure(nc, j))
    } else {
        let (lo, hi) = a.min_max();
        if hi - lo == 0.0 {
            (MixedAction::pure(nr, 0), MixedAction::pure(nc, 0))
        } else {
            simplex(a, lo)?
        }
    };
    certify(a, x, y, tol)
}

fn argbest(n: usize, f: impl Fn(usize) -> f64, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for k in 1..n {
        if better(f(k), f(best)) {
            best = k;
        }
    }
    best
}

fn certify(a: &Matrix, x: MixedAction, y: MixedAction, tol: f64) -> Result<MatrixGameSolution> {
    let lower = a.row_mix(x.probs()).into_iter().fold(f64::INFINITY, f64::min);
    let upper = a.col_mix(y.probs()).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let gap = upper - lower;
    if !(gap <= 2.0 * tol) {
        return Err(Error::Certificate { gap, tol });
    }
    Ok(MatrixGameSolution { value: 0.5 * (lower + upper), x_star: x, y_star: y, lower, upper })
}

/// `max 1^T q` subject to `B q <= 1, q >= 0` with `B = A - lo + 1 > 0`.
/// The primal gives the column strategy, the slack reduced costs the row
/// strategy.
fn simplex(a: &Matrix, lo: f64) -> Result<(MixedAction, MixedAction)> {
    let (m, n) = (a.rows, a.cols);
    let width = n + m + 1;
    let rhs = width - 1;
    let mut t = vec![0.0; (m + 1) * width];
    for i in 0..m {
        for j in 0..n {
            t[i * width + j] = a.get(i, j) - lo + 1.0;
        }
        t[i * width + n + i] = 1.0;
        t[i * width + rhs] = 1.0;
    }
    for j in 0..n {
        t[m * width + j] = -1.0;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let mut pivots = 0;
    while let Some(e) = (0..n + m).find(|&c| t[m * width + c] < -PIVOT_EPS) {
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let coef = t[r * width + e];
            if coef <= PIVOT_EPS {
                continue;
            }
            let ratio = t[r * width + rhs] / coef;
            leave = match leave {
                None => Some((r, ratio)),
                Some((br, best)) => {
                    let slack = 1e-12 * best.abs().max(1e-300);
                    if ratio < best - slack || (ratio <= best + slack && basis[r] < basis[br]) {
                        Some((r, ratio))
                    } else {
                        Some((br, best))
                    }
                }
            };
        }
        // B > 0 keeps the problem bounded, so a leaving row always exists
        let (r, _) = leave.ok_or(Error::Precondition("unbounded matrix-game tableau"))?;
        log::trace!("pivot {pivots}: enter {e}, leave {} (row {r})", basis[r]);
        pivot(&mut t, width, m, r, e);
        basis[r] = e;
        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::NotConverged { iterations: pivots, bound: f64::NAN });
        }
    }

    let mut q = vec![0.0; n];
    for (r, &b) in basis.iter().enumerate() {
        if b < n {
            q[b] = t[r * width + rhs];
        }
    }
    let p: Vec<f64> = (0..m).map(|i| t[m * width + n + i]).collect();
    log::trace!("simplex done after {pivots} pivots, objective {}", t[m * width + rhs]);
    Ok((MixedAction::normalized(p), MixedAction::normalized(q)))
}

fn pivot(t: &mut [f64], width: usize, m: usize, r: usize, e: usize) {
    let inv = 1.0 / t[r * width + e];
    for c in 0..width {
        t[r * width + c] *= inv;
    }
    t[r * width + e] = 1.0;
    for row in 0..=m {
        if row == r {
            continue;
        }
        let f = t[row * width + e];
        if f == 0.0 {
            continue;
        }
        for c in 0..width {
            t[row * width + c] -= f * t[r * width + c];
        }
        t[row * width + e] = 0.0;
    }
}

/// `min_j (x^T A)_j`: the payoff `x` guarantees.
pub fn best_response_value(a: &Matrix, x: &MixedAction) -> Result<f64> {
    if x.len() != a.rows {
        return Err(Error::Dimension { expected: a.rows, found: x.len() });
    }
    Ok(a.row_mix(x.probs()).into_iter().fold(f64::INFINITY, f64::min))
}

/// Result of the grid search in [`value_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    /// Best guarantee of a grid row strategy; never above the value.
    pub lower: f64,
    /// Best guarantee of a grid column strategy; never below the value.
    pub upper: f64,
    /// A priori width bound `span (rows + cols) / (2 grid_n)`.
    pub a_priori: f64,
}

impl OracleValue {
    pub fn estimate(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn error_bound(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

pub const ORACLE_MAX_DIM: usize = 4;
const ORACLE_MAX_POINTS: u64 = 50_000_000;

/// Brute-force value bracket over the simplex grids of resolution
/// `1 / grid_n` for both players.
pub fn value_oracle(a: &Matrix, grid_n: usize) -> Result<OracleValue> {
    if a.rows > ORACLE_MAX_DIM || a.cols > ORACLE_MAX_DIM {
        return Err(Error::Size { what: "oracle matrix", limit: ORACLE_MAX_DIM });
    }
    if grid_n == 0 {
        return Err(Error::Parameter { name: "grid_n", value: 0.0 });
    }
    let points = |d: usize| (1..d as u64).fold(1u64, |acc, k| acc * (grid_n as u64 + k) / k);
    if points(a.rows).max(points(a.cols)) > ORACLE_MAX_POINTS {
        return Err(Error::Size { what: "oracle grid points", limit: ORACLE_MAX_POINTS as usize });
    }
    let mut lower = f64::NEG_INFINITY;
    for_each_grid_point(a.rows, grid_n, |x| {
        let g = a.row_mix(x).into_iter().fold(f64::INFINITY, f64::min);
        lower = lower.max(g);
    });
    let mut upper = f64::INFINITY;
    for_each_grid_point(a.cols, grid_n, |y| {
        let g = a.col_mix(y).into_iter().fold(f64::NEG_INFINITY, f64::max);
        upper = upper.min(g);
    });
    let (lo, hi) = a.min_max();
    let a_priori = (hi - lo) * (a.rows + a.cols) as f64 / (2.0 * grid_n as f64);
    Ok(OracleValue { lower, upper, a_priori })
}

/// Visits every `p` with `p_i = c_i / n`, `c_i >= 0` integers summing to `n`.
fn for_each_grid_point(dim: usize, n: usize, mut f: impl FnMut(&[f64])) {
    fn fill(p: &mut [f64], idx: usize, left: usize, n: usize, f: &mut dyn FnMut(&[f64])) {
        if idx + 1 == p.len() {
            p[idx] = left as f64 / n as f64;
            f(p);
            return;
        }
        for c in 0..=left {
            p[idx] = c as f64 / n as f64;
            fill(p, idx + 1, left - c, n, f);
        }
    }
    let mut p = vec![0.0; dim];
    fill(&mut p, 0, n, n, &mut f);
}
