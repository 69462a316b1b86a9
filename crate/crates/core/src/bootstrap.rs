//! Residual bootstrap of the efficiency degree under the efficient-market null.
//!
//! Null samples are `x*_t = a0_hat + e*_t`, with `e*` drawn with replacement
//! from the centered TV-AR residuals. Each replication refits the TV-AR model
//! and records its degree path; the bands are pointwise quantiles of those
//! paths. Replication `i` draws from ChaCha stream `i` of the master seed, so
//! results do not depend on how replications are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{month_range, ReturnSeries, YearMonth};
use crate::tvar::{degree_of, fit_tvar, fit_tvar_values, DegreeSeries, TvArFit, DEFAULT_SINGULAR_TOL};

/// Identifies the random stream of one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubSeed {
    pub master: u64,
    pub index: u64,
}

impl SubSeed {
    pub fn new(master: u64, index: u64) -> Self {
        Self { master, index }
    }

    fn rng(self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master);
        rng.set_stream(self.index);
        rng
    }
}

fn centered(residuals: &[f64]) -> Result<Vec<f64>> {
    if residuals.is_empty() {
        return Err(Error::InvalidArgument("empty residual pool".into()));
    }
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    Ok(residuals.iter().map(|e| e - mean).collect())
}

fn draw(alpha0: f64, pool: &[f64], n: usize, seed: SubSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..n).map(|_| alpha0 + pool[rng.random_range(0..pool.len())]).collect()
}

/// One null sample with the same length and dates as the series behind `base`.
pub fn simulate_null_sample(base: &TvArFit, sub_seed: SubSeed) -> Result<ReturnSeries> {
    let pool = centered(&base.residuals)?;
    let first = base
        .dates
        .first()
        .ok_or_else(|| Error::InvalidArgument("fit carries no dates".into()))?;
    let start = first.add_months(-(base.q as i64));
    let values = draw(base.alpha0, &pool, base.n_obs, sub_seed);
    ReturnSeries::new("null", month_range(start, base.n_obs), values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSeries {
    pub dates: Vec<YearMonth>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub level: f64,
    pub reps: usize,
    pub seed: u64,
    /// Replications whose refit failed and were left out of the quantiles.
    pub failed: usize,
}

impl BandSeries {
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub q: usize,
    pub lambda: f64,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub singular_tol: f64,
}

impl BootstrapConfig {
    pub fn new(q: usize, lambda: f64, reps: usize, level: f64, seed: u64) -> Self {
        Self { q, lambda, reps, level, seed, singular_tol: DEFAULT_SINGULAR_TOL }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 100 {
            return Err(Error::InvalidArgument(format!("reps must be at least 100, got {}", self.reps)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

pub fn bootstrap_bands(
    returns: &ReturnSeries,
    q: usize,
    lambda: f64,
    reps: usize,
    level: f64,
    seed: u64,
) -> Result<BandSeries> {
    let config = BootstrapConfig::new(q, lambda, reps, level, seed);
    config.validate()?;
    let base = fit_tvar(returns, q, lambda)?;
    bootstrap_bands_from_fit(&base, &config)
}

/// Bands around an existing base fit; runs on the current rayon pool.
pub fn bootstrap_bands_from_fit(base: &TvArFit, config: &BootstrapConfig) -> Result<BandSeries> {
    config.validate()?;
    let pool = centered(&base.residuals)?;
    let n = base.n_obs;
    let n_periods = base.n_periods();

    let paths: Vec<Option<Vec<f64>>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|i| {
            let x = draw(base.alpha0, &pool, n, SubSeed::new(config.seed, i));
            fit_tvar_values(&x, config.q, config.lambda).ok().map(|fit| {
                fit.slope_sums()
                    .into_iter()
                    .map(|s| degree_of(s, config.singular_tol).unwrap_or(f64::INFINITY))
                    .collect()
            })
        })
        .collect();

    let ok: Vec<Vec<f64>> = paths.into_iter().flatten().collect();
    let failed = config.reps - ok.len();
    // More than 1% failures aborts.
    if failed * 100 > config.reps {
        return Err(Error::BootstrapFailures { failed, reps: config.reps });
    }

    let lo_p = (1.0 - config.level) / 2.0;
    let hi_p = 1.0 - lo_p;
    let mut column = vec![0.0; ok.len()];
    let mut lower = Vec::with_capacity(n_periods);
    let mut upper = Vec::with_capacity(n_periods);
    for t in 0..n_periods {
        for (c, path) in column.iter_mut().zip(&ok) {
            *c = path[t];
        }
        column.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&column, lo_p));
        upper.push(quantile_sorted(&column, hi_p));
    }
    Ok(BandSeries {
        dates: base.dates.clone(),
        lower,
        upper,
        level: config.level,
        reps: config.reps,
        seed: config.seed,
        failed,
    })
}

/// Linear interpolation between order statistics (Hyndman-Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    if frac == 0.0 || sorted[lo] == sorted[hi] {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfficiencyFlag {
    Inefficient,
    Singular,
    EfficientConsistent,
}

impl EfficiencyFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            EfficiencyFlag::Inefficient => "inefficient",
            EfficiencyFlag::Singular => "singular",
            EfficiencyFlag::EfficientConsistent => "efficient-consistent",
        }
    }
}

/// A period is inefficient when its degree lies strictly above the upper band.
pub fn classify_efficiency(degree: &DegreeSeries, bands: &BandSeries) -> Result<Vec<EfficiencyFlag>> {
    if degree.dates != bands.dates || degree.len() != bands.len() {
        return Err(Error::Misaligned(format!(
            "degree series has {} periods, bands have {}",
            degree.len(),
            bands.len()
        )));
    }
    Ok(degree
        .zeta
        .iter()
        .zip(&bands.upper)
        .map(|(z, up)| match z {
            None => EfficiencyFlag::Singular,
            Some(z) if z > up => EfficiencyFlag::Inefficient,
            Some(_) => EfficiencyFlag::EfficientConsistent,
        })
        .collect())
}
