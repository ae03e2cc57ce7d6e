//! Reference points from IEC 61000-4-15 for the 230 V / 50 Hz lamp.

use super::meter::{FlickermeterConfig, FlickermeterState};
use super::{drive_meter, PstReading, WeightingConstants, PINST_GAIN};
use crate::error::Result;
use crate::signal::{CarrierSpec, ModulatingSpec, Shape};

/// Sinusoidal fluctuations giving max P_inst = 1: `(frequency Hz, ΔU/U %)`.
pub const SINUSOIDAL_PINST_UNITY: &[(f64, f64)] = &[
    (0.5, 2.325),
    (1.0, 1.397),
    (3.0, 0.645),
    (5.0, 0.396),
    (8.8, 0.250),
    (10.0, 0.261),
    (20.0, 0.704),
    (25.0, 1.037),
];

/// Rectangular fluctuations giving Pst = 1: `(changes per minute, ΔU/U %)`.
pub const RECTANGULAR_PST_UNITY: &[(f64, f64)] = &[
    (1.0, 2.724),
    (2.0, 2.211),
    (7.0, 1.459),
    (39.0, 0.906),
    (110.0, 0.725),
    (1620.0, 0.402),
];

/// Relative tolerance applied to every compliance point.
pub const COMPLIANCE_TOLERANCE: f64 = 0.08;

/// Maximum settled P_inst for a sinusoidal fluctuation on the pure carrier.
pub fn sinusoidal_max_pinst(freq: f64, depth: f64, input_rate: f64) -> Result<f64> {
    sinusoidal_max_pinst_with(&WeightingConstants::LAMP_230V_50HZ, freq, depth, input_rate)
}

pub(crate) fn sinusoidal_max_pinst_with(
    weighting: &WeightingConstants,
    freq: f64,
    depth: f64,
    input_rate: f64,
) -> Result<f64> {
    let config = FlickermeterConfig {
        input_rate,
        window: 20.0_f64.max(4.0 / freq),
        settle: 30.0,
        ..FlickermeterConfig::default()
    };
    let mut meter = FlickermeterState::with_parts(config, weighting, PINST_GAIN)?;
    drive_meter(&mut meter, CarrierSpec::default(), ModulatingSpec::new(Shape::Sinusoidal, freq, depth)?)?;
    Ok(meter.p_inst().iter().cloned().fold(0.0, f64::max))
}

/// Pst of a rectangular fluctuation with `changes_per_minute` level changes
/// (two per period) over a full 10-minute window.
pub fn rectangular_pst(changes_per_minute: f64, depth: f64, input_rate: f64) -> Result<PstReading> {
    rectangular_pst_with(&WeightingConstants::LAMP_230V_50HZ, changes_per_minute, depth, input_rate)
}

pub(crate) fn rectangular_pst_with(
    weighting: &WeightingConstants,
    changes_per_minute: f64,
    depth: f64,
    input_rate: f64,
) -> Result<PstReading> {
    let config = FlickermeterConfig {
        input_rate,
        window: 600.0,
        settle: 30.0,
        ..FlickermeterConfig::default()
    };
    let mut meter = FlickermeterState::with_parts(config, weighting, PINST_GAIN)?;
    let f_m = changes_per_minute / 120.0;
    drive_meter(&mut meter, CarrierSpec::default(), ModulatingSpec::new(Shape::Rectangular, f_m, depth)?)?;
    meter.pst()
}
