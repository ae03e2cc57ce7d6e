//! Minimal SVG line charts of Pst curves. No plotting dependency.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::summary::{Curve, Summary};
use crate::error::{Error, Result};
use crate::flicker::PST_FLOOR;
use crate::signal::Shape;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 130.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

pub fn shape_color(shape: Shape) -> &'static str {
    match shape {
        Shape::Sinusoidal => "#1f5fbf",
        Shape::Triangular => "#2e8b3a",
        Shape::Trapezoidal => "#7b3fa0",
        Shape::Rectangular => "#c62828",
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub log_x: bool,
    pub x_label: &'static str,
}

fn nice_ticks(lo: f64, hi: f64, log: bool) -> Vec<f64> {
    if log {
        let (a, b) = (lo.log10().floor() as i32, hi.log10().ceil() as i32);
        return (a..=b).map(|e| 10f64.powi(e)).collect();
    }
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| span / s <= 6.0)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).floor() as i64;
    let last = (hi / step).ceil() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1000.0 || v.abs() < 0.01 {
        format!("{v:e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Renders `curves` (x, Pst) on one chart. Non-positive x values are
/// dropped on a log axis.
pub fn render_chart(title: &str, axes: Axes, curves: &[Curve]) -> String {
    let usable = |x: f64| !axes.log_x || x > 0.0;
    let pts = curves.iter().flat_map(|c| c.points.iter()).filter(|p| usable(p.0) && p.1.is_finite());
    let (mut x0, mut x1, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, PST_FLOOR);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1) = if axes.log_x { (1.0, 10.0) } else { (0.0, 1.0) };
    }
    if x1 <= x0 {
        x1 = if axes.log_x { x0 * 10.0 } else { x0 + 1.0 };
    }
    let xt = nice_ticks(x0, x1, axes.log_x);
    let (x0, x1) = (xt[0].min(x0), xt[xt.len() - 1].max(x1));
    let yt = nice_ticks(0.0, y1 * 1.05, false);
    let y1 = yt[yt.len() - 1];

    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| {
        let t = if axes.log_x {
            (x.log10() - x0.log10()) / (x1.log10() - x0.log10())
        } else {
            (x - x0) / (x1 - x0)
        };
        MARGIN_L + t * pw
    };
    let sy = |y: f64| MARGIN_T + ph * (1.0 - y / y1);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    for &t in &xt {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.2}" y1="{MARGIN_T}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
            MARGIN_T + ph,
            MARGIN_T + ph + 16.0,
            fmt_tick(t)
        );
    }
    for &t in &yt {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
            MARGIN_L + pw,
            MARGIN_L - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN_L}" y1="{fy:.2}" x2="{:.2}" y2="{fy:.2}" stroke="#888" stroke-dasharray="4 3"/>"##,
        MARGIN_L + pw,
        fy = sy(PST_FLOOR)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0,
        escape(axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">Pst</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0
    );

    for (i, c) in curves.iter().enumerate() {
        let color = shape_color(c.shape);
        let coords: Vec<String> = c
            .points
            .iter()
            .filter(|p| usable(p.0) && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 22.0,
            lx + 28.0,
            ly + 4.0,
            legend(c)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn legend(c: &Curve) -> String {
    format!("{} m_c={}", c.shape.short_name(), c.m_c)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tag(v: f64) -> String {
    v.to_string().replace('.', "p")
}

/// Writes the charts for a summary into `dir`: Pst against f_m per
/// (carrier, depth) for stage 1, Pst against depth per (carrier, f_m) for
/// stage 2. Returns the written paths.
pub fn write_charts(summary: &Summary, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (source, axes, what) = if summary.stage == 2 {
        (
            &summary.depth_curves,
            Axes { log_x: false, x_label: "modulation depth (%)" },
            "f_m",
        )
    } else {
        (
            &summary.fm_curves,
            Axes { log_x: true, x_label: "modulating frequency (Hz)" },
            "depth",
        )
    };
    let mut groups: Vec<((f64, f64), Vec<Curve>)> = Vec::new();
    for c in source {
        let k = (c.m_c, c.fixed);
        match groups.iter_mut().find(|g| g.0 == k) {
            Some(g) => g.1.push(c.clone()),
            None => groups.push((k, vec![c.clone()])),
        }
    }
    let mut written = Vec::new();
    for ((m_c, fixed), curves) in groups {
        let unit = if what == "depth" { "%" } else { " Hz" };
        let title = format!("{}: m_c={m_c}, {what}={fixed}{unit}", summary.plan_name);
        let svg = render_chart(&title, axes, &curves);
        let path = dir.join(format!("{}_mc{}_{what}{}.svg", summary.plan_name, tag(m_c), tag(fixed)));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
