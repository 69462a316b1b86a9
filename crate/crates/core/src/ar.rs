//! Time-invariant AR(q) baseline: least squares, SBIC order choice,
//! Newey-West standard errors and Hansen's joint parameter-constancy test.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::ols;
use crate::series::{ReturnSeries, YearMonth};

/// Least-squares fit of `x_t = a0 + a1 x_{t-1} + ... + aq x_{t-q} + e_t`.
#[derive(Debug, Clone)]
pub struct ArFit {
    pub order: usize,
    /// `(a0, a1, ..., aq)`
    pub alpha: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Newey-West covariance at the automatic bandwidth.
    pub hac_cov: DMatrix<f64>,
    pub hac_bandwidth: usize,
    pub adj_r2: f64,
    pub sbic: f64,
    pub n_used: usize,
    /// `RSS / n_used`
    pub sigma2: f64,
    pub dates: Vec<YearMonth>,
    design: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
}

impl ArFit {
    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    /// HAC standard errors in the order of `alpha`.
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.alpha.len()).map(|i| self.hac_cov[(i, i)].max(0.0).sqrt()).collect()
    }

    pub fn slopes(&self) -> &[f64] {
        &self.alpha[1..]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LcResult {
    pub statistic: f64,
    /// Regression coefficients plus the error variance.
    pub n_params: usize,
    pub critical_1pct: f64,
    pub reject_1pct: bool,
}

/// `floor(4 * (n / 100)^(2/9))`.
pub fn newey_west_bandwidth(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

fn ar_design(x: &[f64], q: usize, first: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = x.len() - first;
    let design = DMatrix::from_fn(rows, q + 1, |r, j| if j == 0 { 1.0 } else { x[first + r - j] });
    let y = DVector::from_fn(rows, |r, _| x[first + r]);
    (design, y)
}

fn sbic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    (rss / n).ln() + k as f64 * n.ln() / n
}

fn check_length(n: usize, q: usize) -> Result<()> {
    if n <= q + 2 {
        Err(Error::InsufficientData { needed: q + 2, have: n })
    } else {
        Ok(())
    }
}

pub fn fit_ar_ols(returns: &ReturnSeries, q: usize) -> Result<ArFit> {
    if q == 0 {
        return Err(Error::InvalidArgument("AR order must be at least 1".into()));
    }
    check_length(returns.len(), q)?;
    let x = returns.values();
    let (design, y) = ar_design(x, q, q);
    let fit = ols(&design, &y, "AR least squares")?;
    let n = design.nrows();
    let k = q + 1;

    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let adj_r2 = if tss > 0.0 && n > k {
        1.0 - (fit.rss / (n - k) as f64) / (tss / (n - 1) as f64)
    } else {
        f64::NAN
    };
    let residuals: Vec<f64> = fit.resid.iter().copied().collect();
    let bandwidth = newey_west_bandwidth(n);
    let hac_cov = sandwich(&design, &residuals, &fit.xtx_inv, bandwidth);

    Ok(ArFit {
        order: q,
        alpha: fit.coef.iter().copied().collect(),
        residuals,
        hac_cov,
        hac_bandwidth: bandwidth,
        adj_r2,
        sbic: sbic(fit.rss, n, k),
        n_used: n,
        sigma2: fit.rss / n as f64,
        dates: returns.dates()[q..].to_vec(),
        design,
        xtx_inv: fit.xtx_inv,
    })
}

/// SBIC for every order `1..=q_max`, all on rows `q_max + 1 ..= T`.
pub fn sbic_profile(returns: &ReturnSeries, q_max: usize) -> Result<Vec<f64>> {
    if q_max == 0 {
        return Err(Error::InvalidArgument("q_max must be at least 1".into()));
    }
    check_length(returns.len(), q_max)?;
    let x = returns.values();
    (1..=q_max)
        .map(|q| {
            let (design, y) = ar_design(x, q, q_max);
            let fit = ols(&design, &y, "SBIC order selection")?;
            Ok(sbic(fit.rss, design.nrows(), q + 1))
        })
        .collect()
}

/// Ties go to the smaller order.
pub fn select_order_sbic(returns: &ReturnSeries, q_max: usize) -> Result<usize> {
    let profile = sbic_profile(returns, q_max)?;
    let mut best = 0;
    for (i, v) in profile.iter().enumerate() {
        if *v < profile[best] {
            best = i;
        }
    }
    Ok(best + 1)
}

/// Bartlett-kernel long-run covariance of the scores `x_t e_t` (unscaled sums).
fn hac_meat(design: &DMatrix<f64>, resid: &[f64], bandwidth: usize) -> DMatrix<f64> {
    let (n, k) = design.shape();
    let scores = DMatrix::from_fn(n, k, |t, j| design[(t, j)] * resid[t]);
    let mut meat = scores.transpose() * &scores;
    for lag in 1..=bandwidth.min(n.saturating_sub(1)) {
        let w = 1.0 - lag as f64 / (bandwidth as f64 + 1.0);
        let lead = scores.rows(lag, n - lag);
        let lagged = scores.rows(0, n - lag);
        let gamma = lead.transpose() * lagged;
        meat += (&gamma + gamma.transpose()) * w;
    }
    meat
}

fn sandwich(design: &DMatrix<f64>, resid: &[f64], xtx_inv: &DMatrix<f64>, bandwidth: usize) -> DMatrix<f64> {
    let meat = hac_meat(design, resid, bandwidth);
    let cov = xtx_inv * meat * xtx_inv;
    (&cov + cov.transpose()) * 0.5
}

/// Newey-West covariance of the AR coefficients. `None` uses the automatic
/// bandwidth; `Some(0)` is White's heteroskedasticity-only estimator.
pub fn newey_west_cov(fit: &ArFit, bandwidth: Option<usize>) -> DMatrix<f64> {
    let bw = bandwidth.unwrap_or_else(|| newey_west_bandwidth(fit.n_used));
    sandwich(&fit.design, &fit.residuals, &fit.xtx_inv, bw)
}

/// Hansen (1992) 1% critical values of the joint L_C statistic, indexed by
/// parameter count 1..=20.
const HANSEN_CRITICAL_1PCT: [f64; 20] = [
    0.748, 1.07, 1.35, 1.60, 1.88, 2.12, 2.35, 2.59, 2.82, 3.05, 3.27, 3.51, 3.69, 3.90, 4.07,
    4.30, 4.51, 4.73, 4.92, 5.13,
];

pub fn hansen_critical_1pct(n_params: usize) -> Option<f64> {
    n_params.checked_sub(1).and_then(|i| HANSEN_CRITICAL_1PCT.get(i)).copied()
}

/// Joint L_C statistic over the regression coefficients and the error
/// variance, built from partial sums of the first-order conditions.
pub fn hansen_constancy_test(fit: &ArFit) -> Result<LcResult> {
    let (n, k) = fit.design.shape();
    let m = k + 1;
    let critical = hansen_critical_1pct(m)
        .ok_or_else(|| Error::InvalidArgument(format!("no L_C critical value for {m} parameters")))?;

    let e = &fit.residuals;
    let sigma2 = fit.sigma2;
    let y_scale: f64 = fit.design.column(1).iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if sigma2 * n as f64 <= 1e-20 * y_scale {
        // Exact fit: every score is zero.
        return Ok(LcResult { statistic: 0.0, n_params: m, critical_1pct: critical, reject_1pct: false });
    }

    let scores = DMatrix::from_fn(n, m, |t, j| {
        if j < k {
            fit.design[(t, j)] * e[t]
        } else {
            e[t] * e[t] - sigma2
        }
    });
    let v = scores.transpose() * &scores;
    let chol = v.cholesky().ok_or(Error::Singular("L_C score covariance"))?;

    let mut partial = DVector::zeros(m);
    let mut total = 0.0;
    for t in 0..n {
        partial += scores.row(t).transpose();
        total += partial.dot(&chol.solve(&partial));
    }
    let statistic = total / n as f64;
    if !statistic.is_finite() {
        return Err(Error::NonFinite("L_C statistic"));
    }
    Ok(LcResult {
        statistic,
        n_params: m,
        critical_1pct: critical,
        reject_1pct: statistic > critical,
    })
}

/// `sum_{j=1..q} alpha_j`, intercept excluded.
pub fn cumulative_ar_sum(fit: &ArFit) -> f64 {
    fit.slopes().iter().sum()
}
