//! Monthly price tables, log returns and descriptive statistics.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A calendar month. Inputs are monthly averages, so there is no day component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct YearMonth {
    pub year: i32,
    pub month: u8,
}

impl YearMonth {
    pub fn new(year: i32, month: u8) -> Option<Self> {
        (1..=12).contains(&month).then_some(Self { year, month })
    }

    pub fn succ(self) -> Self {
        if self.month == 12 {
            Self { year: self.year + 1, month: 1 }
        } else {
            Self { year: self.year, month: self.month + 1 }
        }
    }

    /// Shifts by `months`, which may be negative.
    pub fn add_months(self, months: i64) -> Self {
        let ord = self.ordinal() + months;
        Self {
            year: ord.div_euclid(12) as i32,
            month: (ord.rem_euclid(12) + 1) as u8,
        }
    }

    /// Months elapsed since year 0, used for arithmetic and chart axes.
    pub fn ordinal(self) -> i64 {
        i64::from(self.year) * 12 + i64::from(self.month) - 1
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        let (y, m) = s.trim().split_once('-').ok_or(())?;
        if y.len() != 4 || m.len() != 2 {
            return Err(());
        }
        let year: i32 = y.parse().map_err(|_| ())?;
        let month: u8 = m.parse().map_err(|_| ())?;
        YearMonth::new(year, month).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    pub id: String,
    dates: Vec<YearMonth>,
    values: Vec<f64>,
}

impl PriceSeries {
    /// Validates contiguity, positivity and minimum length.
    pub fn new(id: impl Into<String>, dates: Vec<YearMonth>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(Error::Misaligned(format!(
                "{id}: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if values.len() < 2 {
            return Err(Error::InsufficientData { needed: 1, have: values.len() });
        }
        check_contiguous(&dates)?;
        for (d, &v) in dates.iter().zip(&values) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::NonPositivePrice { column: id, date: *d, value: v });
            }
        }
        Ok(Self { id, dates, values })
    }

    /// Builds a series of consecutive months starting at `start`.
    pub fn from_start(id: impl Into<String>, start: YearMonth, values: Vec<f64>) -> Result<Self> {
        let dates = month_range(start, values.len());
        Self::new(id, dates, values)
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub id: String,
    dates: Vec<YearMonth>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(id: impl Into<String>, dates: Vec<YearMonth>, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if dates.len() != values.len() {
            return Err(Error::Misaligned(format!(
                "{id}: {} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("return series"));
        }
        check_contiguous(&dates)?;
        Ok(Self { id, dates, values })
    }

    /// Convenience constructor for synthetic data: consecutive months from `start`.
    pub fn from_values(id: impl Into<String>, start: YearMonth, values: Vec<f64>) -> Result<Self> {
        let dates = month_range(start, values.len());
        Self::new(id, dates, values)
    }

    pub fn dates(&self) -> &[YearMonth] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `n` consecutive months beginning at `start`.
pub fn month_range(start: YearMonth, n: usize) -> Vec<YearMonth> {
    std::iter::successors(Some(start), |d| Some(d.succ())).take(n).collect()
}

fn check_contiguous(dates: &[YearMonth]) -> Result<()> {
    for w in dates.windows(2) {
        if w[1] == w[0] {
            return Err(Error::DuplicateMonth(w[1]));
        }
        if w[1] != w[0].succ() {
            return Err(Error::MonthGap { missing: w[0].succ() });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

/// One selected column of a price table and the label it is reported under.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub column: String,
    pub label: String,
}

impl ColumnSpec {
    pub fn new(column: impl Into<String>) -> Self {
        let column = column.into();
        Self { label: column.clone(), column }
    }

    pub fn labelled(column: impl Into<String>, label: impl Into<String>) -> Self {
        Self { column: column.into(), label: label.into() }
    }
}

impl FromStr for ColumnSpec {
    type Err = Error;

    /// `column` or `column=label`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.split_once('=') {
            Some((c, l)) if !c.trim().is_empty() && !l.trim().is_empty() => {
                Ok(Self::labelled(c.trim(), l.trim()))
            }
            None if !s.is_empty() => Ok(Self::new(s)),
            _ => Err(Error::InvalidArgument(format!("bad column selection {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableSpec {
    pub date_column: String,
    pub delimiter: u8,
    pub columns: Vec<ColumnSpec>,
    /// Inclusive window. When absent each column spans its own first to last
    /// non-empty cell.
    pub window: Option<(YearMonth, YearMonth)>,
}

impl TableSpec {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Self { date_column: "date".into(), delimiter: b',', columns, window: None }
    }
}

/// Parses a delimited price table into one [`PriceSeries`] per selected column.
pub fn load_price_table<R: Read>(source: R, spec: &TableSpec) -> Result<Vec<PriceSeries>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::MissingHeader);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    let date_idx = find(&spec.date_column)?;
    let col_idx: Vec<usize> = spec
        .columns
        .iter()
        .map(|c| find(&c.column))
        .collect::<Result<_>>()?;

    let mut rows: Vec<(YearMonth, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw = record.get(date_idx).unwrap_or("");
        let date: YearMonth = raw
            .parse()
            .map_err(|_| Error::MalformedDate { value: raw.to_string(), line })?;
        let cells = col_idx
            .iter()
            .map(|&i| record.get(i).unwrap_or("").to_string())
            .collect();
        rows.push((date, cells));
    }
    rows.sort_by_key(|(d, _)| *d);

    if let Some((start, end)) = spec.window {
        if start > end {
            return Err(Error::InvalidArgument(format!("window start {start} after end {end}")));
        }
        match (rows.first(), rows.last()) {
            (Some((first, _)), Some((last, _))) if *first <= start && end <= *last => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "window {start}..{end} outside the data range"
                )))
            }
        }
        rows.retain(|(d, _)| (start..=end).contains(d));
    }
    let dates: Vec<YearMonth> = rows.iter().map(|(d, _)| *d).collect();
    check_contiguous(&dates)?;

    spec.columns
        .iter()
        .enumerate()
        .map(|(k, col)| {
            let cells: Vec<&str> = rows.iter().map(|(_, c)| c[k].as_str()).collect();
            let (lo, hi) = if spec.window.is_some() {
                (0, cells.len())
            } else {
                let lo = cells.iter().position(|c| !c.is_empty());
                let hi = cells.iter().rposition(|c| !c.is_empty());
                match (lo, hi) {
                    (Some(lo), Some(hi)) => (lo, hi + 1),
                    _ => return Err(Error::EmptyColumn(col.column.clone())),
                }
            };
            if hi <= lo {
                return Err(Error::EmptyColumn(col.column.clone()));
            }
            let mut values = Vec::with_capacity(hi - lo);
            for (date, cell) in dates[lo..hi].iter().zip(&cells[lo..hi]) {
                if cell.is_empty() {
                    return Err(Error::MissingValue { column: col.column.clone(), date: *date });
                }
                let v: f64 = cell.parse().map_err(|_| Error::BadNumber {
                    column: col.column.clone(),
                    date: *date,
                    value: cell.to_string(),
                })?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::NonPositivePrice {
                        column: col.column.clone(),
                        date: *date,
                        value: v,
                    });
                }
                values.push(v);
            }
            PriceSeries::new(col.label.clone(), dates[lo..hi].to_vec(), values)
        })
        .collect()
}

/// `x_t = ln p_t - ln p_{t-1}`, dated at the later month.
pub fn log_returns(prices: &PriceSeries) -> ReturnSeries {
    let values = prices.values.windows(2).map(|w| w[1].ln() - w[0].ln()).collect();
    ReturnSeries {
        id: prices.id.clone(),
        dates: prices.dates[1..].to_vec(),
        values,
    }
}

pub fn describe(returns: &ReturnSeries) -> Result<DescriptiveStats> {
    describe_values(returns.values())
}

pub(crate) fn describe_values(x: &[f64]) -> Result<DescriptiveStats> {
    let n = x.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Rounding in the summed mean can push it past an extreme when all values
    // coincide.
    let mean = mean.clamp(min, max);
    Ok(DescriptiveStats { mean, sd, min, max, n })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ym(y: i32, m: u8) -> YearMonth {
        YearMonth::new(y, m).unwrap()
    }

    #[test]
    fn parses_two_row_table() {
        let csv = "date,PI\n1924-06,100\n1924-07,110\n";
        let out = load_price_table(csv.as_bytes(), &TableSpec::new(vec![ColumnSpec::new("PI")]))
            .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].len(), 2);
        assert_eq!(out[0].dates()[0], ym(1924, 6));
    }

    #[test]
    fn eqpi_window_gives_255_prices() {
        let mut csv = String::from("date,EQPI\n");
        let dates = month_range(ym(1924, 6), 255);
        assert_eq!(*dates.last().unwrap(), ym(1945, 8));
        for (i, d) in dates.iter().enumerate() {
            csv.push_str(&format!("{d},{}\n", 100.0 + i as f64));
        }
        let out = load_price_table(csv.as_bytes(), &TableSpec::new(vec![ColumnSpec::new("EQPI")]))
            .unwrap();
        assert_eq!(out[0].len(), 255);
        assert_eq!(log_returns(&out[0]).len(), 254);
    }

    #[test]
    fn gap_names_missing_month() {
        let csv = "date,PI\n1924-06,100\n1924-07,101\n1924-09,102\n";
        let err = load_price_table(csv.as_bytes(), &TableSpec::new(vec![ColumnSpec::new("PI")]))
            .unwrap_err();
        match err {
            Error::MonthGap { missing } => assert_eq!(missing, ym(1924, 8)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err_string(csv).contains("1924-08"));
    }

    fn err_string(csv: &str) -> String {
        load_price_table(csv.as_bytes(), &TableSpec::new(vec![ColumnSpec::new("PI")]))
            .unwrap_err()
            .to_string()
    }

    #[test]
    fn rows_are_sorted_and_duplicates_rejected() {
        let csv = "date,PI\n1924-07,110\n1924-06,100\n";
        let out = load_price_table(csv.as_bytes(), &TableSpec::new(vec![ColumnSpec::new("PI")]))
            .unwrap();
        assert_eq!(out[0].values(), &[100.0, 110.0]);

        assert!(matches!(
            load_price_table(
                "date,PI\n1924-06,1\n1924-06,2\n".as_bytes(),
                &TableSpec::new(vec![ColumnSpec::new("PI")])
            ),
            Err(Error::DuplicateMonth(_))
        ));
    }

    #[test]
    fn malformed_dates_and_prices() {
        assert!(matches!(
            load_price_table(
                "date,PI\n1924/06,1\n".as_bytes(),
                &TableSpec::new(vec![ColumnSpec::new("PI")])
            ),
            Err(Error::MalformedDate { .. })
        ));
        assert!(matches!(
            load_price_table(
                "date,PI\n1924-06,1\n1924-07,0\n".as_bytes(),
                &TableSpec::new(vec![ColumnSpec::new("PI")])
            ),
            Err(Error::NonPositivePrice { .. })
        ));
        assert!(matches!(
            load_price_table(
                "date,PI\n1924-06,1\n1924-07,\n1924-08,2\n".as_bytes(),
                &TableSpec::new(vec![ColumnSpec::new("PI")])
            ),
            Err(Error::MissingValue { .. })
        ));
        assert!(matches!(
            load_price_table(
                "date,PI\n1924-06,1\n".as_bytes(),
                &TableSpec::new(vec![ColumnSpec::new("XX")])
            ),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn columns_with_different_spans() {
        let csv = "date,old,new\n1900-01,1,\n1900-02,2,5\n1900-03,3,6\n1900-04,4,\n";
        let spec = TableSpec::new(vec![
            ColumnSpec::labelled("old", "old/PI"),
            ColumnSpec::labelled("new", "new/PI"),
        ]);
        let out = load_price_table(csv.as_bytes(), &spec).unwrap();
        assert_eq!(out[0].id, "old/PI");
        assert_eq!(out[0].len(), 4);
        assert_eq!(out[1].len(), 2);
        assert_eq!(out[1].dates()[0], ym(1900, 2));

        let mut windowed = spec.clone();
        windowed.window = Some((ym(1900, 1), ym(1900, 3)));
        assert!(matches!(
            load_price_table(csv.as_bytes(), &windowed),
            Err(Error::MissingValue { .. })
        ));
    }

    #[test]
    fn semicolon_delimiter() {
        let mut spec = TableSpec::new(vec![ColumnSpec::new("PI")]);
        spec.delimiter = b';';
        let out = load_price_table("date;PI\n2000-01;1.5\n2000-02;1.6\n".as_bytes(), &spec).unwrap();
        assert_eq!(out[0].values(), &[1.5, 1.6]);
    }

    #[test]
    fn log_return_examples() {
        let p = PriceSeries::from_start("c", ym(2000, 1), vec![50.0, 50.0, 50.0]).unwrap();
        assert_eq!(log_returns(&p).values(), &[0.0, 0.0]);

        let p = PriceSeries::from_start("p", ym(2000, 1), vec![100.0, 110.0]).unwrap();
        let r = log_returns(&p);
        assert!((r.values()[0] - 0.095_310_179_804_324_87).abs() < 1e-15);
        assert_eq!(r.dates(), &[ym(2000, 2)]);
    }

    #[test]
    fn describe_degenerate_and_empty() {
        let r = ReturnSeries::from_values("z", ym(2000, 1), vec![0.0; 3]).unwrap();
        let s = describe(&r).unwrap();
        assert_eq!((s.mean, s.sd, s.min, s.max, s.n), (0.0, 0.0, 0.0, 0.0, 3));

        let r = ReturnSeries::from_values("e", ym(2000, 1), vec![]).unwrap();
        assert!(matches!(describe(&r), Err(Error::EmptySeries)));
    }

    #[test]
    fn month_arithmetic() {
        assert_eq!(ym(1924, 12).succ(), ym(1925, 1));
        assert_eq!(ym(1925, 1).add_months(-1), ym(1924, 12));
        assert_eq!(ym(1941, 12).add_months(44), ym(1945, 8));
        assert_eq!("1904-02".parse::<YearMonth>(), Ok(ym(1904, 2)));
        assert!("1904-13".parse::<YearMonth>().is_err());
        assert!("1904-2".parse::<YearMonth>().is_err());
    }

    #[test]
    fn column_spec_parsing() {
        let c: ColumnSpec = "oldPI=old/PI".parse().unwrap();
        assert_eq!(c, ColumnSpec::labelled("oldPI", "old/PI"));
        let c: ColumnSpec = "EQPI".parse().unwrap();
        assert_eq!(c.label, "EQPI");
        assert!("=x".parse::<ColumnSpec>().is_err());
    }
}
