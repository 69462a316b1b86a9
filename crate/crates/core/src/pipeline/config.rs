//! Pipeline configuration: a `key = value` file with flag overrides on top.

use std::path::PathBuf;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{ColumnSpec, YearMonth};
use crate::unit_root::LagCriterion;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub input: PathBuf,
    pub columns: Vec<ColumnSpec>,
    pub delimiter: char,
    pub date_column: String,
    pub window: Option<(YearMonth, YearMonth)>,
    pub q_max: usize,
    /// Fixes the AR order instead of choosing it by SBIC.
    pub order: Option<usize>,
    /// `None` applies the Schwert-style rule.
    pub p_max: Option<usize>,
    pub criterion: LagCriterion,
    pub lambda: f64,
    pub bands: bool,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
    pub singular_tol: f64,
    pub events: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: PathBuf::new(),
            columns: Vec::new(),
            delimiter: ',',
            date_column: "date".into(),
            window: None,
            q_max: 8,
            order: None,
            p_max: None,
            criterion: LagCriterion::Mbic,
            lambda: 1.0,
            bands: true,
            reps: 10_000,
            level: 0.99,
            seed: 0,
            singular_tol: crate::tvar::DEFAULT_SINGULAR_TOL,
            events: None,
            out: PathBuf::from("out"),
            workers: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_month(key: &str, value: &str) -> Result<YearMonth> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: malformed month {value:?}")))
}

fn optional(value: &str) -> Option<&str> {
    let v = value.trim();
    (!v.is_empty() && !v.eq_ignore_ascii_case("auto") && !v.eq_ignore_ascii_case("none")).then_some(v)
}

impl PipelineConfig {
    /// Sets one option by its flag name (without the leading dashes).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "input" => self.input = PathBuf::from(value),
            "columns" => {
                self.columns = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "delimiter" => {
                let mut chars = value.chars();
                self.delimiter = match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii() => c,
                    _ if value == "\\t" || value.eq_ignore_ascii_case("tab") => '\t',
                    _ => return Err(Error::Config(format!("delimiter: expected one ASCII character, got {value:?}"))),
                }
            }
            "date-column" => self.date_column = value.to_string(),
            "window" => {
                self.window = match optional(value) {
                    None => None,
                    Some(v) => {
                        let (a, b) = v
                            .split_once(':')
                            .ok_or_else(|| Error::Config(format!("window: expected START:END, got {v:?}")))?;
                        Some((parse_month(key, a)?, parse_month(key, b)?))
                    }
                }
            }
            "q-max" => self.q_max = parse(key, value)?,
            "order" => self.order = optional(value).map(|v| parse(key, v)).transpose()?,
            "p-max" => self.p_max = optional(value).map(|v| parse(key, v)).transpose()?,
            "criterion" => self.criterion = value.parse().map_err(|_| Error::Config(format!("criterion: {value:?}")))?,
            "lambda" => self.lambda = parse(key, value)?,
            "bands" => self.bands = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            "level" => self.level = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "singular-tol" => self.singular_tol = parse(key, value)?,
            "events" => self.events = optional(value).map(PathBuf::from),
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = optional(value).map(|v| parse(key, v)).transpose()?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of a config file; `#` starts a comment.
    pub fn apply_file_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.input.as_os_str().is_empty() {
            return fail("input path is required".into());
        }
        if self.columns.is_empty() {
            return fail("at least one column must be selected".into());
        }
        let mut labels: Vec<&str> = self.columns.iter().map(|c| c.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return fail("column labels must be unique".into());
        }
        if self.q_max == 0 {
            return fail("q-max must be at least 1".into());
        }
        if self.order == Some(0) {
            return fail("order must be at least 1".into());
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return fail(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.bands && self.reps < 100 {
            return fail(format!("reps must be at least 100, got {}", self.reps));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return fail(format!("level must lie in (0, 1), got {}", self.level));
        }
        if self.singular_tol.is_nan() || self.singular_tol <= 0.0 {
            return fail("singular-tol must be positive".into());
        }
        if let Some((a, b)) = self.window {
            if a > b {
                return fail(format!("window start {a} after end {b}"));
            }
        }
        if self.workers == Some(0) {
            return fail("workers must be at least 1".into());
        }
        Ok(())
    }
}
