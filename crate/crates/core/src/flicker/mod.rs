//! Software flickermeter following the IEC 61000-4-15 block structure for the
//! 230 V / 50 Hz reference lamp.
//!
//! | block | operation                                             |
//! |-------|-------------------------------------------------------|
//! | 1     | divide by tracked rms (60 s first-order tracker)      |
//! | 2     | square                                                |
//! | 3     | 0.05 Hz HP, 35 Hz 6th-order Butterworth, lamp weighting |
//! | 4     | square, 300 ms first-order LP, calibration gain       |
//! | 5     | percentiles of P_inst over the window, Pst formula    |
//!
//! Blocks 3 and 4 are bilinear discretizations of their analog prototypes,
//! prewarped at each stage's characteristic frequency. Block 5 uses exact
//! order statistics of P_inst stored at the classifier rate.

pub mod blocks;
pub mod classifier;
pub mod compliance;
pub mod iir;
pub mod meter;

pub use blocks::{
    block1_normalize, block2_square, block3_weight, block4_smooth, Normalizer, Smoother, WeightingCascade,
    WeightingConstants, PINST_GAIN,
};
pub use classifier::{block5_classify, classify, pst_from_log_cpf, Percentiles, PstReading, PST_FLOOR};
pub use meter::{measure_pst, measure_pst_with_state, FlickermeterConfig, FlickermeterState, LampReference};

use crate::error::Result;
use crate::signal::{CarrierGenerator, CarrierSpec, ModulatingGenerator, ModulatingSpec, Shape};

/// Perceptibility threshold used for calibration: 8.8 Hz sinusoidal
/// fluctuation of 0.250 % on the 230 V / 50 Hz lamp gives max P_inst = 1.
pub const THRESHOLD_FREQUENCY_HZ: f64 = 8.8;
pub const THRESHOLD_DEPTH_PCT: f64 = 0.25;

/// Feeds `seconds` of a modulated 230 V / 50 Hz signal into `meter`, generated
/// directly at the meter input rate.
pub(crate) fn drive_meter(meter: &mut FlickermeterState, carrier: CarrierSpec, modulating: ModulatingSpec) -> Result<()> {
    let fs = meter.config().input_rate;
    let total = meter.config().required_input_samples();
    let carrier = CarrierGenerator::new(carrier, fs)?;
    let modulating = ModulatingGenerator::new(modulating, fs)?;
    let chunk = fs as usize;
    let (mut c, mut m) = (vec![0.0; chunk], vec![0.0; chunk]);
    let mut start = 0u64;
    while start < total {
        let len = chunk.min((total - start) as usize);
        carrier.fill(start, &mut c[..len]);
        modulating.fill(start, &mut m[..len]);
        crate::signal::modulate_in_place(&mut c[..len], &m[..len], modulating.spec().depth)?;
        meter.push(&c[..len])?;
        start += len as u64;
    }
    Ok(())
}

/// Re-derives [`PINST_GAIN`]: run blocks 1 to 4 with unit gain on the
/// threshold fluctuation and return the reciprocal of the settled maximum.
pub fn calibrate_pinst_gain(input_rate: f64) -> Result<f64> {
    let config = FlickermeterConfig {
        input_rate,
        classifier_rate: input_rate / (input_rate / 500.0).round(),
        window: 10.0,
        settle: 20.0,
        ..FlickermeterConfig::default()
    };
    let mut meter = FlickermeterState::with_parts(config, &WeightingConstants::LAMP_230V_50HZ, 1.0)?;
    let modulating = ModulatingSpec::new(Shape::Sinusoidal, THRESHOLD_FREQUENCY_HZ, THRESHOLD_DEPTH_PCT)?;
    drive_meter(&mut meter, CarrierSpec::default(), modulating)?;
    let max = meter.p_inst().iter().cloned().fold(0.0, f64::max);
    Ok(1.0 / max)
}
