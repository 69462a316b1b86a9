//! Tidy series files and standalone SVG charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::bootstrap::{BandSeries, EfficiencyFlag};
use crate::error::{Error, Result};
use crate::pipeline::events::{EventEnd, EventTable};
use crate::series::{ReturnSeries, YearMonth};
use crate::tvar::DegreeSeries;

pub const DEGREE_CSV_HEADER: &str = "date,zeta,lower,upper,flag";

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// `date,zeta,lower,upper,flag` rows at full precision. Singular periods
/// leave `zeta` empty; without bands `lower`/`upper`/`flag` are empty.
pub fn degree_csv(degree: &DegreeSeries, bands: Option<&BandSeries>, flags: Option<&[EfficiencyFlag]>) -> String {
    let mut out = String::from(DEGREE_CSV_HEADER);
    out.push('\n');
    for (t, date) in degree.dates.iter().enumerate() {
        let _ = writeln!(
            out,
            "{date},{},{},{},{}",
            opt(degree.zeta[t]),
            opt(bands.map(|b| b.lower[t])),
            opt(bands.map(|b| b.upper[t])),
            flags.map(|f| f[t].as_str()).unwrap_or("")
        );
    }
    out
}

/// Percent label such as `99%` or `97.5%`.
pub fn level_label(level: f64) -> String {
    let pct = level * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("{}%", pct.round())
    } else {
        format!("{}%", (pct * 10.0).round() / 10.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 48.0;

/// Shared frame: axes, year ticks, event shading.
struct Frame {
    first: YearMonth,
    last: YearMonth,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, d: YearMonth) -> f64 {
        let span = (self.last.ordinal() - self.first.ordinal()).max(1) as f64;
        LEFT + (d.ordinal() - self.first.ordinal()) as f64 / span * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        let v = v.clamp(self.y_min, self.y_max);
        TOP + (self.y_max - v) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }

    fn month_width(&self) -> f64 {
        let span = (self.last.ordinal() - self.first.ordinal()).max(1) as f64;
        (WIDTH - LEFT - RIGHT) / span
    }

    fn open(&self, title: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"11\">"
        );
        let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
        let _ = writeln!(s, "<text x=\"{LEFT}\" y=\"22\" font-size=\"14\">{}</text>", escape(title));
        s
    }

    fn events(&self, s: &mut String, events: &EventTable) {
        let _ = writeln!(s, "<g class=\"events\">");
        for ev in &events.events {
            let Some((a, b)) = ev.span_within(self.first, self.last) else { continue };
            let x0 = self.x(a);
            let w = (self.x(b) - x0).max(self.month_width()).max(1.0);
            let (fill, opacity) = match ev.end {
                EventEnd::Point => ("#555555", 0.35),
                _ => ("#9e9e9e", 0.25),
            };
            let _ = writeln!(
                s,
                "<rect x=\"{x0:.2}\" y=\"{TOP}\" width=\"{w:.2}\" height=\"{:.2}\" fill=\"{fill}\" fill-opacity=\"{opacity}\"><title>{} ({a}{})</title></rect>",
                HEIGHT - TOP - BOTTOM,
                escape(&ev.label),
                if a == b { String::new() } else { format!(" to {b}") }
            );
        }
        let _ = writeln!(s, "</g>");
    }

    fn axes(&self, s: &mut String, y_label: &str) {
        let bottom = HEIGHT - BOTTOM;
        let _ = writeln!(
            s,
            "<line x1=\"{LEFT}\" y1=\"{bottom}\" x2=\"{}\" y2=\"{bottom}\" stroke=\"black\"/>",
            WIDTH - RIGHT
        );
        let _ = writeln!(s, "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{bottom}\" stroke=\"black\"/>");
        let years = (self.last.year - self.first.year).max(1);
        let step = [1, 2, 5, 10, 20, 50].into_iter().find(|s| years / s <= 12).unwrap_or(100);
        let mut year = self.first.year + (step - self.first.year.rem_euclid(step)) % step;
        while year <= self.last.year {
            let d = YearMonth { year, month: 1 };
            if d >= self.first {
                let x = self.x(d);
                let _ = writeln!(
                    s,
                    "<line x1=\"{x:.2}\" y1=\"{bottom}\" x2=\"{x:.2}\" y2=\"{}\" stroke=\"black\"/><text x=\"{x:.2}\" y=\"{}\" text-anchor=\"middle\">{year}</text>",
                    bottom + 4.0,
                    bottom + 16.0
                );
            }
            year += step;
        }
        for k in 0..=4 {
            let v = self.y_min + (self.y_max - self.y_min) * k as f64 / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                s,
                "<line x1=\"{}\" y1=\"{y:.2}\" x2=\"{LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/><text x=\"{}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
                LEFT - 4.0,
                LEFT - 6.0,
                y + 4.0,
                tick_label(v)
            );
        }
        let _ = writeln!(
            s,
            "<text x=\"16\" y=\"{:.2}\" transform=\"rotate(-90 16 {:.2})\" text-anchor=\"middle\">{}</text>",
            (TOP + bottom) / 2.0,
            (TOP + bottom) / 2.0,
            escape(y_label)
        );
    }

    fn polyline(&self, s: &mut String, dates: &[YearMonth], values: &[Option<f64>], style: &str) {
        let mut segment: Vec<String> = Vec::new();
        let flush = |seg: &mut Vec<String>, s: &mut String| {
            if seg.len() > 1 {
                let _ = writeln!(s, "<polyline fill=\"none\" {style} points=\"{}\"/>", seg.join(" "));
            } else if seg.len() == 1 {
                let (x, y) = seg[0].split_once(',').unwrap_or(("0", "0"));
                let _ = writeln!(s, "<circle cx=\"{x}\" cy=\"{y}\" r=\"1.5\" {style}/>");
            }
            seg.clear();
        };
        for (d, v) in dates.iter().zip(values) {
            match v {
                Some(v) if v.is_finite() => segment.push(format!("{:.2},{:.2}", self.x(*d), self.y(*v))),
                _ => flush(&mut segment, s),
            }
        }
        flush(&mut segment, s);
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn nice_ceiling(v: f64) -> f64 {
    if !(v.is_finite() && v > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    [1.0, 2.0, 2.5, 5.0, 10.0].iter().map(|m| m * mag).find(|c| *c >= v).unwrap_or(10.0 * mag)
}

/// Degree line, dashed band lines and shaded events.
pub fn degree_svg(label: &str, degree: &DegreeSeries, bands: Option<&BandSeries>, events: &EventTable) -> String {
    let (Some(&first), Some(&last)) = (degree.dates.first(), degree.dates.last()) else {
        return String::from("<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n");
    };
    let mut top = degree.zeta.iter().flatten().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    if let Some(b) = bands {
        top = b.upper.iter().copied().filter(|v| v.is_finite()).fold(top, f64::max);
    }
    let frame = Frame { first, last, y_min: 0.0, y_max: nice_ceiling(top) };
    let mut s = frame.open(&format!("Time-varying degree of market efficiency: {label}"));
    frame.events(&mut s, events);
    frame.axes(&mut s, "degree of market efficiency");
    if let Some(b) = bands {
        let style = "stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\"";
        frame.polyline(&mut s, &b.dates, &b.upper.iter().map(|v| Some(*v)).collect::<Vec<_>>(), style);
        frame.polyline(&mut s, &b.dates, &b.lower.iter().map(|v| Some(*v)).collect::<Vec<_>>(), style);
    }
    frame.polyline(&mut s, &degree.dates, &degree.zeta, "stroke=\"black\" stroke-width=\"1.4\"");

    let lx = WIDTH - RIGHT - 230.0;
    let _ = writeln!(s, "<g class=\"legend\">");
    let _ = writeln!(
        s,
        "<line x1=\"{lx}\" y1=\"18\" x2=\"{}\" y2=\"18\" stroke=\"black\" stroke-width=\"1.4\"/><text x=\"{}\" y=\"22\">degree</text>",
        lx + 24.0,
        lx + 30.0
    );
    if let Some(b) = bands {
        let _ = writeln!(
            s,
            "<line x1=\"{}\" y1=\"18\" x2=\"{}\" y2=\"18\" stroke=\"#d62728\" stroke-width=\"1.2\" stroke-dasharray=\"6 4\"/><text x=\"{}\" y=\"22\">{} confidence band</text>",
            lx + 80.0,
            lx + 104.0,
            lx + 110.0,
            level_label(b.level)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

/// Raw monthly returns with a zero line and shaded events.
pub fn returns_svg(returns: &ReturnSeries, events: &EventTable) -> String {
    let (Some(&first), Some(&last)) = (returns.dates().first(), returns.dates().last()) else {
        return String::from("<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n");
    };
    let bound = returns.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let y = nice_ceiling(bound);
    let frame = Frame { first, last, y_min: -y, y_max: y };
    let mut s = frame.open(&format!("Monthly log returns: {}", returns.id));
    frame.events(&mut s, events);
    frame.axes(&mut s, "log return");
    let zero = frame.y(0.0);
    let _ = writeln!(
        s,
        "<line x1=\"{LEFT}\" y1=\"{zero:.2}\" x2=\"{}\" y2=\"{zero:.2}\" stroke=\"#888888\" stroke-dasharray=\"2 2\"/>",
        WIDTH - RIGHT
    );
    let values: Vec<Option<f64>> = returns.values().iter().map(|v| Some(*v)).collect();
    frame.polyline(&mut s, returns.dates(), &values, "stroke=\"#1f77b4\" stroke-width=\"1\"");
    s.push_str("</svg>\n");
    s
}

/// File-name-safe version of a series label (`old/PI` becomes `old_PI`).
pub fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `<slug>_degree.csv`, `<slug>_degree.svg` and `<slug>_returns.svg`.
pub fn emit_plot_data(
    returns: &ReturnSeries,
    degree: &DegreeSeries,
    bands: Option<&BandSeries>,
    flags: Option<&[EfficiencyFlag]>,
    events: &EventTable,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if let Some(b) = bands {
        if b.dates != degree.dates {
            return Err(Error::Misaligned("bands and degree series cover different months".into()));
        }
    }
    if flags.is_some_and(|f| f.len() != degree.len()) {
        return Err(Error::Misaligned("flags and degree series differ in length".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let base = slug(&returns.id);
    let files = [
        (format!("{base}_degree.csv"), degree_csv(degree, bands, flags)),
        (format!("{base}_degree.svg"), degree_svg(&returns.id, degree, bands, events)),
        (format!("{base}_returns.svg"), returns_svg(returns, events)),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = out_dir.join(name);
            write_file(&path, &body)?;
            Ok(path)
        })
        .collect()
}
