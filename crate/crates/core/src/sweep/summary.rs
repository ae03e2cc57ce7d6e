//! Post-processing of sweep results: curves, shape ordering, depth
//! linearity and the frequency bands where Pst clears the floor.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::run::{PointRecord, SweepResult};
use crate::flicker::PST_FLOOR;
use crate::signal::Shape;

/// Expected severity order, most obnoxious first.
pub const SHAPE_SEVERITY_ORDER: [Shape; 4] = [
    Shape::Rectangular,
    Shape::Trapezoidal,
    Shape::Sinusoidal,
    Shape::Triangular,
];

/// Relative slack allowed before a shape-order inversion counts.
pub const ORDERING_TOLERANCE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub m_c: f64,
    pub shape: Shape,
    /// Depth for f_m curves, f_m for depth curves.
    pub fixed: f64,
    /// `(x, pst)` sorted by x.
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub m_c: f64,
    pub f_m: f64,
    pub depth: f64,
    /// Pst in [`SHAPE_SEVERITY_ORDER`].
    pub pst: [f64; 4],
    /// Largest relative shortfall `(next - this) / next` between neighbours.
    pub worst_violation: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub m_c: f64,
    pub shape: Shape,
    pub f_m: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Above-floor points used by the fit.
    pub points: usize,
    /// Pst strictly increasing over the whole depth grid.
    pub strictly_increasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceBands {
    pub m_c: f64,
    pub shape: Shape,
    pub depth: f64,
    /// Contiguous `[f_lo, f_hi]` runs of grid points with Pst ≥ floor.
    pub bands: Vec<(f64, f64)>,
}

impl ExceedanceBands {
    pub fn highest_frequency(&self) -> Option<f64> {
        self.bands.last().map(|b| b.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub plan_name: String,
    pub stage: u8,
    pub fm_curves: Vec<Curve>,
    pub depth_curves: Vec<Curve>,
    pub ordering: Vec<OrderingCheck>,
    pub fits: Vec<LinearFit>,
    pub exceedance: Vec<ExceedanceBands>,
    pub failures: usize,
}

/// Total-order wrapper so float coordinates can key a BTreeMap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct F(f64);
impl Eq for F {}
impl PartialOrd for F {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for F {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn group<K: Ord>(records: &[PointRecord], key: impl Fn(&PointRecord) -> K) -> BTreeMap<K, Vec<&PointRecord>> {
    let mut map: BTreeMap<K, Vec<&PointRecord>> = BTreeMap::new();
    for r in records {
        map.entry(key(r)).or_default().push(r);
    }
    map
}

/// Ordinary least squares `y = slope·x + intercept` with R².
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some((slope, intercept, r2))
}

pub fn summarize(result: &SweepResult) -> Summary {
    let recs = &result.records;

    let mut fm_curves = Vec::new();
    for ((m, shape, d), rows) in group(recs, |r| (F(r.m_c), r.shape, F(r.depth))) {
        let mut points: Vec<_> = rows.iter().map(|r| (r.f_m, r.pst)).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        fm_curves.push(Curve { m_c: m.0, shape, fixed: d.0, points });
    }

    let mut depth_curves = Vec::new();
    let mut fits = Vec::new();
    for ((m, shape, f), rows) in group(recs, |r| (F(r.m_c), r.shape, F(r.f_m))) {
        let mut points: Vec<_> = rows.iter().map(|r| (r.depth, r.pst)).collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.len() >= 2 {
            let above: Vec<_> = points.iter().copied().filter(|p| p.1 >= PST_FLOOR).collect();
            let strictly_increasing = points.windows(2).all(|w| w[1].1 > w[0].1);
            let (slope, intercept, r_squared) = linear_fit(&above).unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            fits.push(LinearFit {
                m_c: m.0,
                shape,
                f_m: f.0,
                slope,
                intercept,
                r_squared,
                points: above.len(),
                strictly_increasing,
            });
        }
        depth_curves.push(Curve { m_c: m.0, shape, fixed: f.0, points });
    }

    let mut ordering = Vec::new();
    for ((m, f, d), rows) in group(recs, |r| (F(r.m_c), F(r.f_m), F(r.depth))) {
        let lookup = |s: Shape| rows.iter().find(|r| r.shape == s).map(|r| r.pst);
        let values: Option<Vec<f64>> = SHAPE_SEVERITY_ORDER.iter().map(|&s| lookup(s)).collect();
        let Some(values) = values else { continue };
        if values.iter().any(|&v| v < PST_FLOOR) {
            continue;
        }
        let worst = values
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[1])
            .fold(0.0, f64::max);
        ordering.push(OrderingCheck {
            m_c: m.0,
            f_m: f.0,
            depth: d.0,
            pst: [values[0], values[1], values[2], values[3]],
            worst_violation: worst,
            holds: worst <= ORDERING_TOLERANCE,
        });
    }

    let exceedance = fm_curves
        .iter()
        .map(|c| {
            let mut bands: Vec<(f64, f64)> = Vec::new();
            let mut open: Option<(f64, f64)> = None;
            for &(f, pst) in &c.points {
                if pst >= PST_FLOOR {
                    open = Some(open.map_or((f, f), |(lo, _)| (lo, f)));
                } else if let Some(b) = open.take() {
                    bands.push(b);
                }
            }
            bands.extend(open);
            ExceedanceBands {
                m_c: c.m_c,
                shape: c.shape,
                depth: c.fixed,
                bands,
            }
        })
        .collect();

    Summary {
        plan_name: result.plan_name.clone(),
        stage: result.stage,
        fm_curves,
        depth_curves,
        ordering,
        fits,
        exceedance,
        failures: result.failures.len(),
    }
}

impl Summary {
    pub fn bands(&self, m_c: f64, shape: Shape, depth: f64) -> Option<&ExceedanceBands> {
        self.exceedance
            .iter()
            .find(|e| e.m_c == m_c && e.shape == shape && e.depth == depth)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "plan {} (stage {})", self.plan_name, self.stage);
        if self.failures > 0 {
            let _ = writeln!(s, "failed points: {}", self.failures);
        }
        let _ = writeln!(s, "\nexceedance bands (Pst >= {PST_FLOOR}):");
        for e in &self.exceedance {
            let bands: Vec<String> = e.bands.iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
            let _ = writeln!(
                s,
                "  m_c={} {:<4} depth={}%: {}",
                e.m_c,
                e.shape,
                e.depth,
                if bands.is_empty() { "none".into() } else { bands.join(" ") }
            );
        }
        if !self.fits.is_empty() {
            let _ = writeln!(s, "\nlinear fits Pst = slope*depth + intercept (above-floor points):");
            let _ = writeln!(s, "  {:>5} {:<4} {:>8} {:>10} {:>10} {:>8} {:>3} {}", "m_c", "shape", "f_m", "slope", "intercept", "R2", "n", "increasing");
            for f in &self.fits {
                let _ = writeln!(
                    s,
                    "  {:>5} {:<5} {:>8} {:>10.5} {:>10.5} {:>8.5} {:>3} {}",
                    f.m_c, f.shape, f.f_m, f.slope, f.intercept, f.r_squared, f.points, f.strictly_increasing
                );
            }
        }
        if !self.ordering.is_empty() {
            let held = self.ordering.iter().filter(|o| o.holds).count();
            let _ = writeln!(
                s,
                "\nshape ordering rect >= trap >= sin >= tri: {held}/{} grid points hold (tolerance {}%)",
                self.ordering.len(),
                ORDERING_TOLERANCE * 100.0
            );
            for o in self.ordering.iter().filter(|o| !o.holds) {
                let _ = writeln!(
                    s,
                    "  violation m_c={} f_m={} depth={}%: {:?} (worst {:.1}%)",
                    o.m_c,
                    o.f_m,
                    o.depth,
                    o.pst,
                    o.worst_violation * 100.0
                );
            }
        }
        s
    }
}
