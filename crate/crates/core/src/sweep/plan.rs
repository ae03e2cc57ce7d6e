//! Sweep plans and their TOML file format.
//!
//! ```toml
//! name = "fig5"
//! stage = 1                      # 1: f_m sweep, 2: depth sweep
//! shapes = ["sin", "tri", "trap", "rect"]
//! depth_grid = [1.0, 5.0, 10.0]  # optional, stage default when omitted
//! # fm_grid = [...]              # optional
//!
//! [[carriers]]
//! m_c = 0.8                      # f_c = 50, u_c = 230 by default
//!
//! [durations]                    # optional
//! settle = 30.0
//! measure = 600.0
//!
//! [chain]                        # optional
//! synthesis_rate = 80000.0
//! fir_order = 200
//! cutoff = 8000.0
//! decimation = 4
//!
//! [meter]                        # optional
//! window = 600.0
//! classifier_rate = 500.0
//! normalization_time_constant = 60.0
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::flicker::FlickermeterConfig;
use crate::frontend::ChainConfig;
use crate::signal::{CarrierSpec, Shape};

pub const STAGE1_DEPTHS: [f64; 3] = [1.0, 5.0, 10.0];
pub const STAGE2_FREQUENCIES: [f64; 2] = [208.8, 1008.8];
pub const STAGE2_DEPTHS: [f64; 9] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0];
/// Log-spaced points below the upper band of the stage I grid.
pub const STAGE1_LOG_POINTS: usize = 30;

/// Stage I modulating frequencies: log-spaced over [0.01, 150] Hz, then two
/// points per 50 Hz step in (150, 1050] Hz at +8.8 and +33.8 Hz offsets from
/// multiples of 50 Hz.
pub fn stage1_frequencies() -> Vec<f64> {
    let (lo, hi) = (0.01f64.ln(), 150f64.ln());
    let mut grid: Vec<f64> = (0..STAGE1_LOG_POINTS)
        .map(|i| {
            let f = (lo + (hi - lo) * i as f64 / (STAGE1_LOG_POINTS - 1) as f64).exp();
            // four significant digits keep the CSV readable
            let scale = 10f64.powi(3 - f.log10().floor() as i32);
            (f * scale).round() / scale
        })
        .collect();
    for k in 3..=20 {
        for offset in [8.8, 33.8] {
            let f = 50.0 * k as f64 + offset;
            if f <= 1050.0 {
                grid.push((f * 10.0).round() / 10.0);
            }
        }
    }
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Durations {
    /// Seconds of signal discarded before the Pst window.
    pub settle: f64,
    /// Seconds of signal measured after settling.
    pub measure: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Self {
            settle: 30.0,
            measure: 600.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeterSettings {
    pub window: f64,
    pub classifier_rate: f64,
    pub normalization_time_constant: f64,
}

impl Default for MeterSettings {
    fn default() -> Self {
        let d = FlickermeterConfig::default();
        Self {
            window: d.window,
            classifier_rate: d.classifier_rate,
            normalization_time_constant: d.normalization_time_constant,
        }
    }
}

/// On-disk plan. Omitted grids take the stage defaults; explicitly empty
/// grids are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    #[serde(default)]
    name: String,
    stage: u8,
    carriers: Vec<CarrierSpec>,
    shapes: Vec<Shape>,
    fm_grid: Option<Vec<f64>>,
    depth_grid: Option<Vec<f64>>,
    #[serde(default)]
    durations: Durations,
    #[serde(default)]
    chain: ChainConfig,
    #[serde(default)]
    meter: MeterSettings,
    #[serde(default)]
    phase: f64,
    #[serde(default = "yes")]
    record_wall_time: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub name: String,
    pub stage: u8,
    pub carriers: Vec<CarrierSpec>,
    pub shapes: Vec<Shape>,
    pub fm_grid: Vec<f64>,
    pub depth_grid: Vec<f64>,
    pub durations: Durations,
    pub chain: ChainConfig,
    pub meter: MeterSettings,
    /// Initial modulating phase, fraction of the period.
    pub phase: f64,
    /// When false, `wall_time_s` is written as 0 so result files are
    /// byte-reproducible.
    pub record_wall_time: bool,
}

impl SweepPlan {
    /// Stage I plan with default grids: f_m sweep at 1, 5 and 10 %.
    pub fn stage1(carriers: Vec<CarrierSpec>, shapes: Vec<Shape>) -> Self {
        Self {
            name: "stage1".into(),
            stage: 1,
            carriers,
            shapes,
            fm_grid: stage1_frequencies(),
            depth_grid: STAGE1_DEPTHS.to_vec(),
            durations: Durations::default(),
            chain: ChainConfig::default(),
            meter: MeterSettings::default(),
            phase: 0.0,
            record_wall_time: true,
        }
    }

    /// Stage II plan with default grids: depth sweep at 208.8 and 1008.8 Hz.
    pub fn stage2(carriers: Vec<CarrierSpec>, shapes: Vec<Shape>) -> Self {
        Self {
            name: "stage2".into(),
            stage: 2,
            fm_grid: STAGE2_FREQUENCIES.to_vec(),
            depth_grid: STAGE2_DEPTHS.to_vec(),
            ..Self::stage1(carriers, shapes)
        }
    }

    /// Desk-scale timing with a shortened Pst window (CI mode).
    pub fn with_short_window(mut self, window: f64) -> Self {
        self.meter.window = window;
        self.durations.measure = window;
        self
    }

    /// Two 10-minute intervals, the first discarded.
    pub fn with_two_interval_protocol(mut self) -> Self {
        self.meter.window = 600.0;
        self.durations = Durations {
            settle: 600.0,
            measure: 600.0,
        };
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: PlanFile = toml::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
        let (fm_default, depth_default) = match file.stage {
            1 => (stage1_frequencies(), STAGE1_DEPTHS.to_vec()),
            2 => (STAGE2_FREQUENCIES.to_vec(), STAGE2_DEPTHS.to_vec()),
            s => return Err(Error::Plan(format!("stage must be 1 or 2, got {s}"))),
        };
        let plan = Self {
            name: file.name,
            stage: file.stage,
            carriers: file.carriers,
            shapes: file.shapes,
            fm_grid: file.fm_grid.unwrap_or(fm_default),
            depth_grid: file.depth_grid.unwrap_or(depth_default),
            durations: file.durations,
            chain: file.chain,
            meter: file.meter,
            phase: file.phase,
            record_wall_time: file.record_wall_time,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut plan = Self::parse(&text)?;
        if plan.name.is_empty() {
            plan.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Error::Plan(format!("{what} grid is empty"));
        if self.carriers.is_empty() {
            return Err(empty("carrier"));
        }
        if self.shapes.is_empty() {
            return Err(empty("shape"));
        }
        if self.fm_grid.is_empty() {
            return Err(empty("f_m"));
        }
        if self.depth_grid.is_empty() {
            return Err(empty("depth"));
        }
        for c in &self.carriers {
            c.validate()?;
        }
        for &f in &self.fm_grid {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::invalid("f_m", format!("{f} must be > 0")));
            }
        }
        for &d in &self.depth_grid {
            if !(d.is_finite() && (0.0..200.0).contains(&d)) {
                return Err(Error::invalid("depth", format!("{d} outside [0, 200)")));
            }
        }
        self.chain.validate()?;
        if self.durations.measure < self.meter.window {
            return Err(Error::Plan(format!(
                "measure duration {} s is shorter than the {} s Pst window",
                self.durations.measure, self.meter.window
            )));
        }
        self.flickermeter_config().validate()
    }

    pub fn flickermeter_config(&self) -> FlickermeterConfig {
        FlickermeterConfig {
            input_rate: self.chain.output_rate(),
            classifier_rate: self.meter.classifier_rate,
            window: self.meter.window,
            settle: self.durations.settle,
            normalization_time_constant: self.meter.normalization_time_constant,
            ..FlickermeterConfig::default()
        }
    }

    pub fn grid_len(&self) -> usize {
        self.carriers.len() * self.shapes.len() * self.fm_grid.len() * self.depth_grid.len()
    }

    /// SHA-256 over the canonical JSON form of the plan.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("plan serializes");
        Sha256::digest(&canonical)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_stage1_grid() {
        let g = stage1_frequencies();
        assert_eq!(g.len(), STAGE1_LOG_POINTS + 36);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[STAGE1_LOG_POINTS - 1], 150.0);
        assert!(g.contains(&208.8) && g.contains(&1008.8) && g.contains(&158.8));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(*g.last().unwrap() <= 1050.0);
    }

    #[test]
    fn parse_minimal_plan_fills_defaults() {
        let plan = SweepPlan::parse(
            r#"
            stage = 2
            shapes = ["sin", "rectangular"]
            [[carriers]]
            m_c = 0.8
            "#,
        )
        .unwrap();
        assert_eq!(plan.fm_grid, STAGE2_FREQUENCIES.to_vec());
        assert_eq!(plan.depth_grid, STAGE2_DEPTHS.to_vec());
        assert_eq!(plan.shapes, vec![Shape::Sinusoidal, Shape::Rectangular]);
        assert_eq!(plan.carriers[0].u_c, 230.0);
        assert_eq!(plan.grid_len(), 2 * 2 * 9);
    }

    #[test]
    fn rejects_bad_plans() {
        let empty = r#"
            stage = 1
            shapes = ["sin"]
            fm_grid = []
            [[carriers]]
            m_c = 1.0
        "#;
        assert!(matches!(SweepPlan::parse(empty), Err(Error::Plan(_))));
        let bad_mc = "stage = 1\nshapes = [\"sin\"]\n[[carriers]]\nm_c = 1.5\n";
        assert!(SweepPlan::parse(bad_mc).is_err());
        let bad_stage = "stage = 3\nshapes = [\"sin\"]\n[[carriers]]\nm_c = 1.0\n";
        assert!(SweepPlan::parse(bad_stage).is_err());
        let unknown = "stage = 1\nshapes = [\"saw\"]\n[[carriers]]\nm_c = 1.0\n";
        assert!(SweepPlan::parse(unknown).is_err());
        let short = "stage = 1\nshapes = [\"sin\"]\n[[carriers]]\nm_c = 1.0\n[durations]\nmeasure = 60.0\n";
        assert!(SweepPlan::parse(short).is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = SweepPlan::stage1(vec![CarrierSpec::default()], vec![Shape::Sinusoidal]);
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.depth_grid = vec![5.0];
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }

    #[test]
    fn protocol_presets() {
        let p = SweepPlan::stage1(vec![CarrierSpec::default()], vec![Shape::Sinusoidal]);
        let long = p.clone().with_two_interval_protocol();
        assert_eq!((long.durations.settle, long.durations.measure), (600.0, 600.0));
        let short = p.with_short_window(60.0);
        assert!(short.validate().is_ok());
        assert_eq!(short.flickermeter_config().window_samples(), 30_000);
    }
}
