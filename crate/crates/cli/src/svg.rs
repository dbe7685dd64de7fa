//! Minimal deterministic SVG line charts.

use std::fmt::Write;

use thiserror::Error;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 480.0;
pub const MARGIN_LEFT: f64 = 70.0;
pub const MARGIN_RIGHT: f64 = 20.0;
pub const MARGIN_TOP: f64 = 40.0;
pub const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Error, PartialEq)]
pub enum SvgError {
    #[error("nothing to plot: no series has any points")]
    EmptySeries,
    #[error("series {series:?} has a non-positive value on a log axis")]
    NonPositiveOnLogAxis { series: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub x_log: bool,
    pub y_log: bool,
    /// Fixed y range; otherwise taken from the data.
    pub y_range: Option<(f64, f64)>,
}

struct Scale {
    lo: f64,
    hi: f64,
    log: bool,
    from: f64,
    to: f64,
}

impl Scale {
    fn new(mut lo: f64, mut hi: f64, log: bool, from: f64, to: f64) -> Self {
        if log {
            lo = lo.log10();
            hi = hi.log10();
        }
        if hi <= lo {
            let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log, from, to }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.from + (v - self.lo) / (self.hi - self.lo) * (self.to - self.from)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let first = self.lo.ceil() as i32;
            let last = self.hi.floor() as i32;
            (first..=last).map(|e| 10f64.powi(e)).collect()
        } else {
            (0..=4).map(|k| self.lo + (self.hi - self.lo) * k as f64 / 4.0).collect()
        }
    }
}

fn label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the series as polylines, one stroke class per series.
pub fn render_svg(series: &[Series], axes: &Axes) -> Result<String, SvgError> {
    let points = || series.iter().flat_map(|s| s.points.iter().copied());
    if points().next().is_none() {
        return Err(SvgError::EmptySeries);
    }
    for s in series {
        let bad = s
            .points
            .iter()
            .any(|&(x, y)| (axes.x_log && !(x > 0.0)) || (axes.y_log && !(y > 0.0)));
        if bad {
            return Err(SvgError::NonPositiveOnLogAxis {
                series: s.name.clone(),
            });
        }
    }
    let finite = || points().filter(|(x, y)| x.is_finite() && y.is_finite());
    let (x_lo, x_hi) = finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
        (lo.min(x), hi.max(x))
    });
    let (y_lo, y_hi) = axes.y_range.unwrap_or_else(|| {
        finite().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, y)| {
            (lo.min(y), hi.max(y))
        })
    });
    let left = MARGIN_LEFT;
    let right = WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = HEIGHT - MARGIN_BOTTOM;
    let xs = Scale::new(x_lo, x_hi, axes.x_log, left, right);
    let ys = Scale::new(y_lo, y_hi, axes.y_log, bottom, top);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    out.push_str("<style>\n");
    out.push_str("  .frame { fill: none; stroke: #000; stroke-width: 1; }\n");
    out.push_str("  .tick { stroke: #ccc; stroke-width: 0.5; }\n");
    out.push_str("  text { font-family: sans-serif; font-size: 12px; }\n");
    for (k, color) in PALETTE.iter().enumerate() {
        let _ = writeln!(
            out,
            "  .series-{k} {{ fill: none; stroke: {color}; stroke-width: 1.2; }}"
        );
    }
    out.push_str("</style>\n");
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        escape(&axes.title)
    );
    for t in xs.ticks() {
        let x = xs.map(t);
        let _ = writeln!(
            out,
            r#"<line class="tick" x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            bottom + 16.0,
            label(t)
        );
    }
    for t in ys.ticks() {
        let y = ys.map(t);
        let _ = writeln!(
            out,
            r#"<line class="tick" x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + 4.0,
            label(t)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect class="frame" x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}"/>"#,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (left + right) / 2.0,
        HEIGHT - 12.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (top + bottom) / 2.0,
        (top + bottom) / 2.0,
        escape(&axes.y_label)
    );
    for (k, s) in series.iter().enumerate() {
        if s.points.is_empty() {
            continue;
        }
        let coords: Vec<String> = s
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", xs.map(x), ys.map(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline class="series-{}" data-name="{}" points="{}"/>"#,
            k % PALETTE.len(),
            escape(&s.name),
            coords.join(" ")
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
