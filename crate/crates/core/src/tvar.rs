//! Time-varying AR model with random-walk slope coefficients, estimated by
//! generalized least squares on a stacked, banded system.
//!
//! With `z_t = (x_{t-1}, ..., x_{t-q})` the model is
//!
//! ```text
//! x_t    = a0 + z_t' b_t + e_t
//! b_t    = b_{t-1} + v_t
//! ```
//!
//! and with `lambda = var(e) / var(v)` the GLS estimate minimises
//!
//! ```text
//! sum_t (x_t - a0 - z_t' b_t)^2 + lambda * sum_{t>first} |b_t - b_{t-1}|^2
//! ```
//!
//! The first effective period carries no penalty row (diffuse start). All
//! rows are collected in a [`StackedSystem`] whose columns are ordered
//! `b_1, ..., b_T` and then `a0`, so every row touches at most `q + 1`
//! consecutive slope columns plus the trailing intercept column. A row-wise
//! Givens QR keeps the triangular factor inside that band, giving `O(T q^3)`
//! work and `O(T q^2)` storage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ReturnSeries, YearMonth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// Observation equation for effective period `t` (0-based).
    Data { period: usize },
    /// Smoothness row tying lag `lag` of period `period` to the period before.
    Penalty { period: usize, lag: usize },
}

/// One row of the stacked least-squares problem, stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedRow {
    pub kind: RowKind,
    /// Column of `coefs[0]`; the coefficients occupy consecutive columns.
    pub first_col: usize,
    pub coefs: Vec<f64>,
    /// Coefficient on the intercept (the last unknown).
    pub intercept: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct StackedSystem {
    pub q: usize,
    pub lambda: f64,
    pub n_periods: usize,
    pub rows: Vec<StackedRow>,
    pub dates: Vec<YearMonth>,
}

impl StackedSystem {
    /// `1 + q * n_periods`.
    pub fn n_unknowns(&self) -> usize {
        1 + self.q * self.n_periods
    }

    pub fn intercept_col(&self) -> usize {
        self.q * self.n_periods
    }

    pub fn n_penalty_rows(&self) -> usize {
        self.rows.iter().filter(|r| matches!(r.kind, RowKind::Penalty { .. })).count()
    }

    /// `A theta - b` for every row.
    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        let ic = self.intercept_col();
        self.rows
            .iter()
            .map(|r| {
                let dot: f64 = r.coefs.iter().enumerate().map(|(k, c)| c * theta[r.first_col + k]).sum();
                dot + r.intercept * theta[ic] - r.rhs
            })
            .collect()
    }

    /// `A'(A theta - b)`, half the gradient of the penalised objective.
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let ic = self.intercept_col();
        let mut g = vec![0.0; self.n_unknowns()];
        for (r, res) in self.rows.iter().zip(self.residuals(theta)) {
            for (k, c) in r.coefs.iter().enumerate() {
                g[r.first_col + k] += c * res;
            }
            g[ic] += r.intercept * res;
        }
        g
    }

    /// Dense copy of the system matrix, row-major. Only for small problems.
    pub fn dense(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.n_unknowns();
        let ic = self.intercept_col();
        let a = self
            .rows
            .iter()
            .map(|r| {
                let mut row = vec![0.0; n];
                for (k, c) in r.coefs.iter().enumerate() {
                    row[r.first_col + k] += c;
                }
                row[ic] += r.intercept;
                row
            })
            .collect();
        (a, self.rows.iter().map(|r| r.rhs).collect())
    }
}

/// `min_len` is the largest series length that is still rejected.
fn check_inputs(n: usize, q: usize, lambda: f64, min_len: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidArgument("TV-AR order must be at least 1".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if n <= min_len {
        return Err(Error::InsufficientData { needed: min_len, have: n });
    }
    Ok(())
}

/// Needs at least two effective periods; estimation needs more (see [`fit_tvar`]).
pub fn build_stacked_system(returns: &ReturnSeries, q: usize, lambda: f64) -> Result<StackedSystem> {
    check_inputs(returns.len(), q, lambda, q + 1)?;
    Ok(stack(returns.values(), q, lambda, returns.dates()[q..].to_vec()))
}

fn stack(x: &[f64], q: usize, lambda: f64, dates: Vec<YearMonth>) -> StackedSystem {
    let n_periods = x.len() - q;
    let w = lambda.sqrt();
    let mut rows = Vec::with_capacity(n_periods * (q + 1));
    for s in 0..n_periods {
        if s > 0 {
            for lag in 0..q {
                let mut coefs = vec![0.0; q + 1];
                coefs[0] = -w;
                coefs[q] = w;
                rows.push(StackedRow {
                    kind: RowKind::Penalty { period: s, lag },
                    first_col: (s - 1) * q + lag,
                    coefs,
                    intercept: 0.0,
                    rhs: 0.0,
                });
            }
        }
        let t = s + q;
        rows.push(StackedRow {
            kind: RowKind::Data { period: s },
            first_col: s * q,
            coefs: (1..=q).map(|j| x[t - j]).collect(),
            intercept: 1.0,
            rhs: x[t],
        });
    }
    StackedSystem { q, lambda, n_periods, rows, dates }
}

/// Upper-triangular factor of a banded least-squares problem with one dense
/// trailing column, accumulated one row at a time by Givens rotations.
struct BandedQr {
    n: usize,
    width: usize,
    band: Vec<f64>,
    border: Vec<f64>,
    rhs: Vec<f64>,
    filled: Vec<bool>,
    col_norm2: Vec<f64>,
    corner: f64,
    corner_rhs: f64,
    corner_norm2: f64,
    ssr: f64,
}

impl BandedQr {
    fn new(n: usize, width: usize) -> Self {
        Self {
            n,
            width,
            band: vec![0.0; n * width],
            border: vec![0.0; n],
            rhs: vec![0.0; n],
            filled: vec![false; n],
            col_norm2: vec![0.0; n],
            corner: 0.0,
            corner_rhs: 0.0,
            corner_norm2: 0.0,
            ssr: 0.0,
        }
    }

    fn add_row(&mut self, row: &StackedRow) {
        let w = self.width;
        let mut buf = vec![0.0; w];
        buf[..row.coefs.len()].copy_from_slice(&row.coefs);
        for (k, c) in row.coefs.iter().enumerate() {
            self.col_norm2[row.first_col + k] += c * c;
        }
        self.corner_norm2 += row.intercept * row.intercept;
        let mut b = row.intercept;
        let mut y = row.rhs;

        let mut j = row.first_col;
        while j < self.n && buf.iter().any(|v| *v != 0.0) {
            let a = buf[0];
            if a != 0.0 {
                let r = &mut self.band[j * w..(j + 1) * w];
                if !self.filled[j] {
                    r.copy_from_slice(&buf);
                    self.border[j] = b;
                    self.rhs[j] = y;
                    self.filled[j] = true;
                    return;
                }
                let (c, s) = givens(r[0], a);
                for (rk, bk) in r.iter_mut().zip(buf.iter_mut()) {
                    let (u, v) = (*rk, *bk);
                    *rk = c * u + s * v;
                    *bk = c * v - s * u;
                }
                let (u, v) = (self.border[j], b);
                self.border[j] = c * u + s * v;
                b = c * v - s * u;
                let (u, v) = (self.rhs[j], y);
                self.rhs[j] = c * u + s * v;
                y = c * v - s * u;
            }
            buf.rotate_left(1);
            buf[w - 1] = 0.0;
            j += 1;
        }

        if b != 0.0 {
            if self.corner == 0.0 {
                self.corner = b;
                self.corner_rhs = y;
                return;
            }
            let (c, s) = givens(self.corner, b);
            let (u, v) = (self.corner_rhs, y);
            self.corner = c * self.corner + s * b;
            self.corner_rhs = c * u + s * v;
            y = c * v - s * u;
        }
        self.ssr += y * y;
    }

    /// Back substitution; the last entry of the result is the dense column.
    fn solve(&self) -> Result<Vec<f64>> {
        const RTOL: f64 = 1e-10;
        let w = self.width;
        if self.corner.abs() <= RTOL * self.corner_norm2.sqrt() || !self.corner.is_finite() {
            return Err(Error::Singular("TV-AR system (intercept)"));
        }
        let mut theta = vec![0.0; self.n + 1];
        let a0 = self.corner_rhs / self.corner;
        theta[self.n] = a0;
        for j in (0..self.n).rev() {
            let r = &self.band[j * w..(j + 1) * w];
            if !self.filled[j] || r[0].abs() <= RTOL * self.col_norm2[j].sqrt() {
                return Err(Error::Singular("TV-AR system"));
            }
            let mut acc = self.rhs[j] - self.border[j] * a0;
            for k in 1..w.min(self.n - j) {
                acc -= r[k] * theta[j + k];
            }
            theta[j] = acc / r[0];
        }
        if theta.iter().all(|v| v.is_finite()) {
            Ok(theta)
        } else {
            Err(Error::NonFinite("TV-AR solve"))
        }
    }
}

fn givens(d: f64, a: f64) -> (f64, f64) {
    let r = d.hypot(a);
    (d / r, a / r)
}

/// Solves the stacked system in the least-squares sense. Returns the unknown
/// vector in column order (slopes by period, then the intercept).
pub fn solve_stacked(system: &StackedSystem) -> Result<Vec<f64>> {
    let n = system.q * system.n_periods;
    let mut qr = BandedQr::new(n, system.q + 1);
    for row in &system.rows {
        qr.add_row(row);
    }
    qr.solve()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvArFit {
    pub q: usize,
    pub alpha0: f64,
    /// Row `t` holds `(a_{1,t}, ..., a_{q,t})`.
    pub paths: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub lambda: f64,
    pub dates: Vec<YearMonth>,
    /// Length of the series the model was fitted to.
    pub n_obs: usize,
}

impl TvArFit {
    pub fn n_periods(&self) -> usize {
        self.paths.len()
    }

    /// `sum_j a_{j,t}` for every period.
    pub fn slope_sums(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.iter().sum()).collect()
    }
}

/// Requires `T > 2q + 2`.
pub fn fit_tvar(returns: &ReturnSeries, q: usize, lambda: f64) -> Result<TvArFit> {
    check_inputs(returns.len(), q, lambda, 2 * q + 2)?;
    let system = build_stacked_system(returns, q, lambda)?;
    fit_system(&system, returns.len())
}

/// Fit on raw values; dates are left empty. Used by the bootstrap workers.
pub(crate) fn fit_tvar_values(x: &[f64], q: usize, lambda: f64) -> Result<TvArFit> {
    check_inputs(x.len(), q, lambda, 2 * q + 2)?;
    fit_system(&stack(x, q, lambda, Vec::new()), x.len())
}

fn fit_system(system: &StackedSystem, n_obs: usize) -> Result<TvArFit> {
    let theta = solve_stacked(system)?;
    let q = system.q;
    let alpha0 = theta[system.intercept_col()];
    let paths: Vec<Vec<f64>> = theta[..q * system.n_periods].chunks(q).map(<[f64]>::to_vec).collect();
    let residuals = system
        .rows
        .iter()
        .filter_map(|r| match r.kind {
            RowKind::Data { period } => {
                let fitted: f64 = r.coefs.iter().zip(&paths[period]).map(|(z, b)| z * b).sum();
                Some(r.rhs - alpha0 - fitted)
            }
            RowKind::Penalty { .. } => None,
        })
        .collect();
    Ok(TvArFit {
        q,
        alpha0,
        paths,
        residuals,
        lambda: system.lambda,
        dates: system.dates.clone(),
        n_obs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSeries {
    pub dates: Vec<YearMonth>,
    /// `None` where `|1 - sum a| < tol`.
    pub zeta: Vec<Option<f64>>,
    pub singular: Vec<bool>,
}

impl DegreeSeries {
    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }
}

pub const DEFAULT_SINGULAR_TOL: f64 = 1e-8;

/// `|s / (1 - s)|` for a slope sum `s`, or `None` near the unit root.
pub fn degree_of(sum: f64, tol: f64) -> Option<f64> {
    let denom = 1.0 - sum;
    (denom.abs() >= tol).then(|| (sum / denom).abs())
}

pub fn efficiency_degree(fit: &TvArFit, tol: f64) -> DegreeSeries {
    let zeta: Vec<Option<f64>> = fit.slope_sums().into_iter().map(|s| degree_of(s, tol)).collect();
    DegreeSeries {
        dates: fit.dates.clone(),
        singular: zeta.iter().map(Option::is_none).collect(),
        zeta,
    }
}
