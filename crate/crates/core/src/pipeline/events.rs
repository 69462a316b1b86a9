//! Historical event table used as chart overlay.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::YearMonth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventEnd {
    /// Single-month event.
    Point,
    Until(YearMonth),
    /// Runs to the end of whatever series it is drawn over.
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub start: YearMonth,
    pub end: EventEnd,
    pub label: String,
}

impl Event {
    /// Inclusive month span clipped to `[first, last]`, or `None` if disjoint.
    pub fn span_within(&self, first: YearMonth, last: YearMonth) -> Option<(YearMonth, YearMonth)> {
        let end = match self.end {
            EventEnd::Point => self.start,
            EventEnd::Until(e) => e,
            EventEnd::Open => last,
        };
        let lo = self.start.max(first);
        let hi = end.min(last);
        (lo <= hi).then_some((lo, hi))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventTable {
    pub events: Vec<Event>,
}

/// Rows are `start,end,label`. `end` may be empty (point event) or `open`.
/// A leading `start,...` header row, blank lines and `#` comments are skipped.
pub fn parse_events(text: &str) -> Result<EventTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());

    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && record.get(0).is_some_and(|s| s.eq_ignore_ascii_case("start")) {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::BadEvent { line, reason: format!("expected 3 fields, found {}", record.len()) });
        }
        let bad_date = |s: &str| Error::BadEvent { line, reason: format!("malformed date {s:?}") };
        let start: YearMonth = record[0].parse().map_err(|_| bad_date(&record[0]))?;
        let end = match &record[1] {
            "" => EventEnd::Point,
            s if s.eq_ignore_ascii_case("open") => EventEnd::Open,
            s => {
                let e: YearMonth = s.parse().map_err(|_| bad_date(s))?;
                if e < start {
                    return Err(Error::BadEvent { line, reason: format!("start {start} after end {e}") });
                }
                EventEnd::Until(e)
            }
        };
        let label = record[2].to_string();
        if label.is_empty() {
            return Err(Error::BadEvent { line, reason: "empty label".into() });
        }
        events.push(Event { start, end, label });
    }
    Ok(EventTable { events })
}

pub fn load_events(path: impl AsRef<Path>) -> Result<EventTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text)
}
