//! ADF-GLS unit-root test (Elliott, Rothenberg and Stock 1996) with the
//! Ng and Perron (2001) modified information criteria for the augmentation lag.
//!
//! The series is first quasi-differenced at the local-to-unity root
//! `rho = 1 + c_bar / T` and regressed on the equally quasi-differenced
//! deterministics. The detrended series then enters a Dickey-Fuller
//! regression without deterministic terms:
//!
//! ```text
//! dy_t = b * y_{t-1} + sum_{j=1..p} d_j * dy_{t-j} + e_t
//! ```
//!
//! and the statistic is the t-ratio on `b`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ols::ols;
use crate::series::ReturnSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetrendModel {
    Constant,
    ConstantTrend,
}

impl DetrendModel {
    /// ERS recommended noncentrality.
    pub fn default_c_bar(self) -> f64 {
        match self {
            DetrendModel::Constant => -7.0,
            DetrendModel::ConstantTrend => -13.5,
        }
    }

    /// Critical values at 1%, 5% and 10%.
    pub fn critical_values(self) -> [f64; 3] {
        match self {
            DetrendModel::Constant => [-2.58, -1.95, -1.62],
            DetrendModel::ConstantTrend => [-3.42, -2.89, -2.57],
        }
    }

    fn n_regressors(self) -> usize {
        match self {
            DetrendModel::Constant => 1,
            DetrendModel::ConstantTrend => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LagCriterion {
    Mbic,
    Maic,
}

impl std::str::FromStr for LagCriterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mbic" => Ok(LagCriterion::Mbic),
            "maic" => Ok(LagCriterion::Maic),
            _ => Err(Error::InvalidArgument(format!("unknown lag criterion {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetrendedSeries {
    pub values: Vec<f64>,
    /// Coefficients of the quasi-differenced deterministic regression
    /// (constant first, then trend).
    pub phi_hat: Vec<f64>,
    pub model: DetrendModel,
    pub c_bar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRootResult {
    pub statistic: f64,
    pub lag: usize,
    pub p_max: usize,
    pub phi_hat: Vec<f64>,
    pub criterion: LagCriterion,
    pub model: DetrendModel,
    pub c_bar: f64,
    pub critical_1pct: f64,
    pub critical_5pct: f64,
    pub critical_10pct: f64,
    pub reject_1pct: bool,
    /// Rows in the final Dickey-Fuller regression.
    pub n_used: usize,
}

/// `floor(12 * (T / 100)^(1/4))`.
pub fn default_p_max(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

pub fn gls_detrend(series: &ReturnSeries, model: DetrendModel, c_bar: f64) -> Result<DetrendedSeries> {
    gls_detrend_values(series.values(), model, c_bar)
}

pub fn gls_detrend_values(y: &[f64], model: DetrendModel, c_bar: f64) -> Result<DetrendedSeries> {
    let n = y.len();
    let k = model.n_regressors();
    if n <= k.max(2) {
        return Err(Error::InsufficientData { needed: k.max(2), have: n });
    }
    let rho = 1.0 + c_bar / n as f64;
    let det = |t: usize, j: usize| -> f64 {
        // t is 1-based
        if j == 0 {
            1.0
        } else {
            t as f64
        }
    };
    let z = DMatrix::from_fn(n, k, |i, j| {
        let t = i + 1;
        if i == 0 {
            det(t, j)
        } else {
            det(t, j) - rho * det(t - 1, j)
        }
    });
    let yq = DVector::from_fn(n, |i, _| if i == 0 { y[0] } else { y[i] - rho * y[i - 1] });
    let fit = ols(&z, &yq, "GLS detrending")?;
    let phi_hat: Vec<f64> = fit.coef.iter().copied().collect();
    let values = (0..n)
        .map(|i| {
            let fitted: f64 = (0..k).map(|j| det(i + 1, j) * phi_hat[j]).sum();
            y[i] - fitted
        })
        .collect();
    Ok(DetrendedSeries { values, phi_hat, model, c_bar })
}

/// Design of the Dickey-Fuller regression with `p` augmentation lags on rows
/// `first..n` (0-based index into the level series, `first >= p + 1`).
fn df_design(y: &[f64], p: usize, first: usize) -> (DMatrix<f64>, DVector<f64>) {
    let n = y.len();
    let rows = n - first;
    let x = DMatrix::from_fn(rows, p + 1, |r, j| {
        let t = first + r;
        if j == 0 {
            y[t - 1]
        } else {
            y[t - j] - y[t - j - 1]
        }
    });
    let dy = DVector::from_fn(rows, |r, _| {
        let t = first + r;
        y[t] - y[t - 1]
    });
    (x, dy)
}

/// Modified information criterion of every lag `0..=p_max` on the common sample.
pub fn modified_criteria(
    detrended: &DetrendedSeries,
    p_max: usize,
    criterion: LagCriterion,
) -> Result<Vec<f64>> {
    let y = &detrended.values;
    if y.len() <= p_max + 2 {
        return Err(Error::InsufficientData { needed: p_max + 2, have: y.len() });
    }
    let first = p_max + 1;
    let n_eff = (y.len() - first) as f64;
    let penalty = match criterion {
        LagCriterion::Mbic => n_eff.ln(),
        LagCriterion::Maic => 2.0,
    };
    let level_ss: f64 = (first..y.len()).map(|t| y[t - 1] * y[t - 1]).sum();
    (0..=p_max)
        .map(|p| {
            let (x, dy) = df_design(y, p, first);
            let fit = ols(&x, &dy, "ADF lag selection")?;
            let sigma2 = fit.rss / n_eff;
            if sigma2 <= 0.0 {
                return Err(Error::Singular("ADF lag selection"));
            }
            let tau = fit.coef[0].powi(2) * level_ss / sigma2;
            Ok(sigma2.ln() + penalty * (tau + p as f64) / n_eff)
        })
        .collect()
}

fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub fn select_lag_mbic(detrended: &DetrendedSeries, p_max: usize) -> Result<usize> {
    select_lag(detrended, p_max, LagCriterion::Mbic)
}

/// Ties go to the smaller lag.
pub fn select_lag(detrended: &DetrendedSeries, p_max: usize, criterion: LagCriterion) -> Result<usize> {
    if p_max == 0 {
        let n = detrended.values.len();
        if n <= 2 {
            return Err(Error::InsufficientData { needed: 2, have: n });
        }
        return Ok(0);
    }
    Ok(argmin_first(&modified_criteria(detrended, p_max, criterion)?))
}

/// Dickey-Fuller t-ratio on the detrended series with exactly `lag`
/// augmentation terms, using every available row.
pub fn df_t_ratio(detrended: &[f64], lag: usize) -> Result<(f64, usize)> {
    let n = detrended.len();
    if n <= lag + 2 {
        return Err(Error::InsufficientData { needed: lag + 2, have: n });
    }
    let (x, dy) = df_design(detrended, lag, lag + 1);
    let rows = x.nrows();
    let dof = rows - (lag + 1);
    if dof == 0 {
        return Err(Error::InsufficientData { needed: lag + 2, have: rows });
    }
    let fit = ols(&x, &dy, "ADF regression")?;
    let s2 = fit.rss / dof as f64;
    let se = (s2 * fit.xtx_inv[(0, 0)]).sqrt();
    let t = fit.coef[0] / se;
    if !t.is_finite() {
        return Err(Error::NonFinite("ADF regression"));
    }
    Ok((t, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfGlsConfig {
    pub model: DetrendModel,
    pub c_bar: f64,
    /// `None` applies [`default_p_max`].
    pub p_max: Option<usize>,
    pub criterion: LagCriterion,
}

impl Default for AdfGlsConfig {
    fn default() -> Self {
        Self {
            model: DetrendModel::ConstantTrend,
            c_bar: DetrendModel::ConstantTrend.default_c_bar(),
            p_max: None,
            criterion: LagCriterion::Mbic,
        }
    }
}

pub fn adf_gls_test(series: &ReturnSeries, p_max: usize, criterion: LagCriterion) -> Result<UnitRootResult> {
    let config = AdfGlsConfig { p_max: Some(p_max), criterion, ..AdfGlsConfig::default() };
    adf_gls_test_with(series.values(), &config)
}

pub fn adf_gls_test_with(y: &[f64], config: &AdfGlsConfig) -> Result<UnitRootResult> {
    let p_max = config.p_max.unwrap_or_else(|| default_p_max(y.len()));
    if y.len() <= p_max + 2 {
        return Err(Error::InsufficientData { needed: p_max + 2, have: y.len() });
    }
    let detrended = gls_detrend_values(y, config.model, config.c_bar)?;
    let lag = select_lag(&detrended, p_max, config.criterion)?;
    let (statistic, n_used) = df_t_ratio(&detrended.values, lag)?;
    let [c1, c5, c10] = config.model.critical_values();
    Ok(UnitRootResult {
        statistic,
        lag,
        p_max,
        phi_hat: detrended.phi_hat,
        criterion: config.criterion,
        model: config.model,
        c_bar: config.c_bar,
        critical_1pct: c1,
        critical_5pct: c5,
        critical_10pct: c10,
        reject_1pct: statistic < c1,
        n_used,
    })
}
