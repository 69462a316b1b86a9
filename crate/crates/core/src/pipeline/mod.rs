//! End-to-end analysis: for every selected price column run the descriptive
//! statistics, the ADF-GLS test, the AR baseline, the TV-AR degree and its
//! bootstrap bands, then write tables, series files and charts.

pub mod config;
pub mod events;
pub mod plot;

use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ar::{cumulative_ar_sum, fit_ar_ols, hansen_constancy_test, select_order_sbic, LcResult};
use crate::bootstrap::{bootstrap_bands_from_fit, classify_efficiency, BandSeries, BootstrapConfig, EfficiencyFlag};
use crate::error::{Error, Result};
use crate::series::{describe, load_price_table, log_returns, DescriptiveStats, PriceSeries, ReturnSeries, TableSpec, YearMonth};
use crate::tvar::{efficiency_degree, fit_tvar, DegreeSeries};
use crate::unit_root::{adf_gls_test_with, AdfGlsConfig, DetrendModel, UnitRootResult};

pub use config::PipelineConfig;
pub use events::{load_events, EventTable};
pub use plot::emit_plot_data;

#[derive(Debug, Clone, Serialize)]
pub struct ArSummary {
    pub order: usize,
    /// `(a0, a1, ..., aq)`
    pub alpha: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub adj_r2: f64,
    pub sbic: f64,
    pub n_used: usize,
    pub hac_bandwidth: usize,
    pub cumulative_sum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub label: String,
    pub first: YearMonth,
    pub last: YearMonth,
    pub stats: DescriptiveStats,
    pub unit_root: UnitRootResult,
    pub ar: ArSummary,
    pub lc: LcResult,
    pub tvar_intercept: f64,
    pub degree: DegreeSeries,
    pub bands: Option<BandSeries>,
    pub flags: Option<Vec<EfficiencyFlag>>,
    #[serde(skip)]
    pub returns: ReturnSeries,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesFailure {
    pub label: String,
    pub stage: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: PipelineConfig,
    pub input_sha256: String,
    pub events_sha256: Option<String>,
    pub series: Vec<String>,
    pub failures: Vec<SeriesFailure>,
}

#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub series: Vec<SeriesReport>,
    pub failures: Vec<SeriesFailure>,
    pub events: EventTable,
    pub manifest: Manifest,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn stage<T>(name: &'static str, r: Result<T>) -> std::result::Result<T, (&'static str, Error)> {
    r.map_err(|e| (name, e))
}

fn analyze_series(prices: &PriceSeries, config: &PipelineConfig) -> std::result::Result<SeriesReport, (&'static str, Error)> {
    let returns = log_returns(prices);
    let stats = stage("describe", describe(&returns))?;
    let adf_config = AdfGlsConfig {
        model: DetrendModel::ConstantTrend,
        c_bar: DetrendModel::ConstantTrend.default_c_bar(),
        p_max: config.p_max,
        criterion: config.criterion,
    };
    let unit_root = stage("adf_gls_test", adf_gls_test_with(returns.values(), &adf_config))?;
    let order = match config.order {
        Some(q) => q,
        None => stage("select_order_sbic", select_order_sbic(&returns, config.q_max))?,
    };
    let fit = stage("fit_ar_ols", fit_ar_ols(&returns, order))?;
    let lc = stage("hansen_constancy_test", hansen_constancy_test(&fit))?;
    let ar = ArSummary {
        order,
        std_errors: fit.std_errors(),
        alpha: fit.alpha.clone(),
        adj_r2: fit.adj_r2,
        sbic: fit.sbic,
        n_used: fit.n_used,
        hac_bandwidth: fit.hac_bandwidth,
        cumulative_sum: cumulative_ar_sum(&fit),
    };
    let tvar = stage("fit_tvar", fit_tvar(&returns, order, config.lambda))?;
    let degree = efficiency_degree(&tvar, config.singular_tol);
    let (bands, flags) = if config.bands {
        let mut boot = BootstrapConfig::new(order, config.lambda, config.reps, config.level, config.seed);
        boot.singular_tol = config.singular_tol;
        let bands = stage("bootstrap_bands", bootstrap_bands_from_fit(&tvar, &boot))?;
        let flags = stage("classify_efficiency", classify_efficiency(&degree, &bands))?;
        (Some(bands), Some(flags))
    } else {
        (None, None)
    };
    Ok(SeriesReport {
        label: prices.id.clone(),
        first: returns.dates()[0],
        last: *returns.dates().last().unwrap_or(&returns.dates()[0]),
        stats,
        unit_root,
        ar,
        lc,
        tvar_intercept: tvar.alpha0,
        degree,
        bands,
        flags,
        returns,
    })
}

/// Runs every stage for every selected series. A failing series is recorded
/// in `failures`; the others continue. Errors here are configuration or
/// input-table problems that affect every series.
pub fn run_pipeline(config: &PipelineConfig) -> Result<ReportBundle> {
    config.validate()?;
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_inner(config)),
        None => run_inner(config),
    }
}

fn run_inner(config: &PipelineConfig) -> Result<ReportBundle> {
    let input_sha256 = sha256_file(&config.input)?;
    let (events, events_sha256) = match &config.events {
        Some(p) => (load_events(p)?, Some(sha256_file(p)?)),
        None => (EventTable::default(), None),
    };
    let file = File::open(&config.input).map_err(|e| Error::io(&config.input, e))?;
    let spec = TableSpec {
        date_column: config.date_column.clone(),
        delimiter: config.delimiter as u8,
        columns: config.columns.clone(),
        window: config.window,
    };
    let prices = load_price_table(std::io::BufReader::new(file), &spec)?;

    let outcomes: Vec<_> = prices.par_iter().map(|p| analyze_series(p, config)).collect();
    let mut series = Vec::new();
    let mut failures = Vec::new();
    for (p, outcome) in prices.iter().zip(outcomes) {
        match outcome {
            Ok(r) => series.push(r),
            Err((stage, e)) => failures.push(SeriesFailure { label: p.id.clone(), stage, message: e.to_string() }),
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        input_sha256,
        events_sha256,
        series: prices.iter().map(|p| p.id.clone()).collect(),
        failures: failures.clone(),
    };
    Ok(ReportBundle { series, failures, events, manifest })
}

pub const DESCRIPTIVE_HEADER: &str =
    "series,first,last,n,mean,sd,min,max,adf_gls,lag,p_max,phi_const,phi_trend,critical_1pct,reject_1pct";
pub const AR_COEF_HEADER: &str = "series,order,term,estimate,std_error";
pub const AR_SUMMARY_HEADER: &str =
    "series,order,n_used,adj_r2,sbic,hac_bandwidth,lc,lc_params,lc_critical_1pct,lc_reject_1pct,cumulative_sum,tvar_intercept,inefficient_periods,singular_periods";
pub const CUMULATIVE_HEADER: &str = "group,n_series,mean_cumulative_sum";

fn descriptive_csv(bundle: &ReportBundle) -> String {
    let mut s = format!("{DESCRIPTIVE_HEADER}\n");
    for r in &bundle.series {
        let u = &r.unit_root;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.label),
            r.first,
            r.last,
            r.stats.n,
            r.stats.mean,
            r.stats.sd,
            r.stats.min,
            r.stats.max,
            u.statistic,
            u.lag,
            u.p_max,
            u.phi_hat[0],
            u.phi_hat.get(1).map(f64::to_string).unwrap_or_default(),
            u.critical_1pct,
            u.reject_1pct
        );
    }
    s
}

fn count_flags(r: &SeriesReport, which: EfficiencyFlag) -> String {
    r.flags
        .as_ref()
        .map(|f| f.iter().filter(|x| **x == which).count().to_string())
        .unwrap_or_default()
}

fn ar_csvs(bundle: &ReportBundle) -> (String, String) {
    let mut coefs = format!("{AR_COEF_HEADER}\n");
    let mut summary = format!("{AR_SUMMARY_HEADER}\n");
    for r in &bundle.series {
        let label = csv_field(&r.label);
        for (j, (a, se)) in r.ar.alpha.iter().zip(&r.ar.std_errors).enumerate() {
            let term = if j == 0 { "constant".to_string() } else { format!("lag{j}") };
            let _ = writeln!(coefs, "{label},{},{term},{a},{se}", r.ar.order);
        }
        let _ = writeln!(
            summary,
            "{label},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.ar.order,
            r.ar.n_used,
            r.ar.adj_r2,
            r.ar.sbic,
            r.ar.hac_bandwidth,
            r.lc.statistic,
            r.lc.n_params,
            r.lc.critical_1pct,
            r.lc.reject_1pct,
            r.ar.cumulative_sum,
            r.tvar_intercept,
            count_flags(r, EfficiencyFlag::Inefficient),
            r.degree.singular.iter().filter(|s| **s).count()
        );
    }
    (coefs, summary)
}

/// Group of a label: the part before the first `/` (`old/PI` is in `old`).
pub fn label_group(label: &str) -> &str {
    label.split_once('/').map_or(label, |(g, _)| g)
}

/// Mean cumulative AR sum per label group, in first-appearance order.
pub fn cumulative_sum_averages(series: &[SeriesReport]) -> Vec<(String, usize, f64)> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for r in series {
        let g = label_group(&r.label);
        match groups.iter_mut().find(|(name, _)| name == g) {
            Some((_, v)) => v.push(r.ar.cumulative_sum),
            None => groups.push((g.to_string(), vec![r.ar.cumulative_sum])),
        }
    }
    groups
        .into_iter()
        .map(|(g, v)| {
            let n = v.len();
            (g, n, v.iter().sum::<f64>() / n as f64)
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Human-readable tables rounded to four decimals.
pub fn render_tables(bundle: &ReportBundle) -> String {
    let series = &bundle.series;
    let mut s = String::new();
    let width = 12;
    let header = |s: &mut String, title: &str| {
        let _ = writeln!(s, "{title}");
        let _ = write!(s, "{:<14}", "");
        for r in series {
            let _ = write!(s, "{:>width$}", r.label);
        }
        s.push('\n');
    };
    let row = |s: &mut String, name: &str, f: &dyn Fn(&SeriesReport) -> String| {
        let _ = write!(s, "{name:<14}");
        for r in series {
            let _ = write!(s, "{:>width$}", f(r));
        }
        s.push('\n');
    };
    let f4 = |v: f64| format!("{v:.4}");

    header(&mut s, "Descriptive statistics and unit-root tests");
    row(&mut s, "Mean", &|r| f4(r.stats.mean));
    row(&mut s, "SD", &|r| f4(r.stats.sd));
    row(&mut s, "Min", &|r| f4(r.stats.min));
    row(&mut s, "Max", &|r| f4(r.stats.max));
    row(&mut s, "ADF-GLS", &|r| f4(r.unit_root.statistic));
    row(&mut s, "Lags", &|r| r.unit_root.lag.to_string());
    row(&mut s, "phi_hat", &|r| f4(r.unit_root.phi_hat[0]));
    row(&mut s, "N", &|r| r.stats.n.to_string());
    let _ = writeln!(s, "ADF-GLS: constant and trend; 1% critical value -3.42.\n");

    header(&mut s, "AR estimates and parameter constancy (Newey-West SE in brackets)");
    let q_max = series.iter().map(|r| r.ar.order).max().unwrap_or(0);
    for j in 0..=q_max {
        let name = if j == 0 { "Constant".to_string() } else { format!("R(t-{j})") };
        row(&mut s, &name, &|r| r.ar.alpha.get(j).map_or("-".into(), |a| f4(*a)));
        row(&mut s, "", &|r| r.ar.std_errors.get(j).map_or("-".into(), |e| format!("[{e:.4}]")));
    }
    row(&mut s, "Adj. R2", &|r| f4(r.ar.adj_r2));
    row(&mut s, "L_C", &|r| format!("{:.4}{}", r.lc.statistic, if r.lc.reject_1pct { "*" } else { "" }));
    row(&mut s, "Cum. AR sum", &|r| f4(r.ar.cumulative_sum));
    let _ = writeln!(s, "* rejects parameter constancy at 1%.\n");

    let _ = writeln!(s, "Average cumulative AR sum by group");
    for (g, n, mean) in cumulative_sum_averages(series) {
        let _ = writeln!(s, "{g:<14}{mean:>width$.4}  ({n} series)");
    }
    if !bundle.failures.is_empty() {
        let _ = writeln!(s, "\nFailed series");
        for f in &bundle.failures {
            let _ = writeln!(s, "{}: {} failed: {}", f.label, f.stage, f.message);
        }
    }
    s
}

/// Writes every output file and returns their paths in a fixed order.
pub fn write_bundle(bundle: &ReportBundle, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = out_dir.join(name);
        plot::write_file(&path, &body)?;
        written.push(path);
        Ok(())
    };
    put("manifest.json", serde_json::to_string_pretty(&bundle.manifest)? + "\n")?;
    put("descriptive.csv", descriptive_csv(bundle))?;
    let (coefs, summary) = ar_csvs(bundle);
    put("ar_coefficients.csv", coefs)?;
    put("ar_summary.csv", summary)?;
    let mut cum = format!("{CUMULATIVE_HEADER}\n");
    for (g, n, mean) in cumulative_sum_averages(&bundle.series) {
        let _ = writeln!(cum, "{},{n},{mean}", csv_field(&g));
    }
    put("cumulative_sums.csv", cum)?;
    put("tables.txt", render_tables(bundle))?;
    put("diagnostics.json", serde_json::to_string_pretty(&bundle.failures)? + "\n")?;
    for r in &bundle.series {
        written.extend(emit_plot_data(
            &r.returns,
            &r.degree,
            r.bands.as_ref(),
            r.flags.as_deref(),
            &bundle.events,
            out_dir,
        )?);
    }
    Ok(written)
}
