//! Minimal deterministic SVG line plots.

use std::fmt::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlotOptions {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
}

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn span(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    }
}

pub fn emit_svg(series: &[Series], opts: &PlotOptions) -> Result<String> {
    if series.is_empty() || series.iter().all(|s| s.points.is_empty()) {
        return Err(Error::InvalidArgument("no data to plot".into()));
    }
    let tx = |v: f64| if opts.log_x { v.log10() } else { v };
    let ty = |v: f64| if opts.log_y { v.log10() } else { v };
    let mut pts = Vec::new();
    for s in series {
        let mut row = Vec::with_capacity(s.points.len());
        for &(x, y) in &s.points {
            let (u, v) = (tx(x), ty(y));
            if !(u.is_finite() && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "series '{}' has a point ({x}, {y}) that cannot be plotted",
                    s.label
                )));
            }
            row.push((u, v));
        }
        pts.push(row);
    }
    let all = pts.iter().flatten();
    let (x0, x1) = span(
        all.clone().map(|p| p.0).fold(f64::INFINITY, f64::min),
        all.clone().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    );
    let (y0, y1) = span(
        all.clone().map(|p| p.1).fold(f64::INFINITY, f64::min),
        all.map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
    );
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |u: f64| LEFT + (u - x0) / (x1 - x0) * pw;
    let sy = |v: f64| TOP + (1.0 - (v - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        "<!-- schema_version={} -->",
        crate::report::SCHEMA_VERSION
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    if !opts.title.is_empty() {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&opts.title)
        );
    }
    let _ = writeln!(
        out,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (u, v) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let xl = if opts.log_x {
            format!("1e{u:.2}")
        } else {
            format!("{u:.4}")
        };
        let yl = if opts.log_y {
            format!("1e{v:.2}")
        } else {
            format!("{v:.4}")
        };
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xl}</text>"#,
            sx(u),
            H - BOTTOM + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yl}</text>"#,
            LEFT - 6.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 12.0,
        escape(&opts.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&opts.y_label)
    );
    for (i, (s, row)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = row
            .iter()
            .map(|&(u, v)| format!("{:.2},{:.2}", sx(u), sy(v)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = W - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}">{}</text>"#,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}
