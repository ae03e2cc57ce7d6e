//! Blocks 1 to 4 of the flickermeter: rms normalization, squaring
//! demodulation, lamp-eye-brain weighting and squaring plus smoothing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::iir::{butterworth_lowpass, first_order_highpass, first_order_lowpass, Biquad, Cascade};
use crate::error::{Error, Result};
use crate::signal::SignalBuffer;

/// Corner of the block 3 high-pass that removes the demodulated DC.
pub const HIGHPASS_HZ: f64 = 0.05;
/// Corner of the block 3 Butterworth low-pass that removes the carrier ripple.
pub const BUTTERWORTH_HZ: f64 = 35.0;
pub const BUTTERWORTH_ORDER: usize = 6;
/// Block 4 sliding-mean time constant.
pub const SMOOTHING_TIME_CONSTANT: f64 = 0.3;
/// Frequency of peak sensitivity of the reference observer.
pub const PEAK_SENSITIVITY_HZ: f64 = 8.8;

/// Block 4 gain that maps the perceptibility threshold (8.8 Hz sinusoidal
/// fluctuation, ΔU/U = 0.250 %, 230 V/50 Hz lamp) to a maximum P_inst of 1.
///
/// Generated by [`super::calibrate_pinst_gain`] at the default 20 kHz input
/// rate; `pinst_gain_reproduces_stored_constant` re-runs the procedure.
pub const PINST_GAIN: f64 = 309_077.0;

/// Weighting-filter constants for the reference lamp, angular units (rad/s)
/// except the dimensionless gain.
///
/// ```text
///            k ω1 s              1 + s/ω2
/// W(s) = ---------------- · ----------------------
///        s² + 2λ s + ω1²    (1 + s/ω3)(1 + s/ω4)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingConstants {
    pub k: f64,
    pub lambda: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub omega3: f64,
    pub omega4: f64,
}

impl WeightingConstants {
    /// 230 V / 50 Hz incandescent reference lamp (IEC 61000-4-15).
    pub const LAMP_230V_50HZ: WeightingConstants = WeightingConstants {
        k: 1.74802,
        lambda: 2.0 * PI * 4.05981,
        omega1: 2.0 * PI * 9.15494,
        omega2: 2.0 * PI * 2.27979,
        omega3: 2.0 * PI * 1.22535,
        omega4: 2.0 * PI * 21.9,
    };

    /// Analog magnitude `|W(j2πf)|`.
    pub fn analog_magnitude(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq;
        let bp_num = self.k * self.omega1 * w;
        let bp_den = ((self.omega1 * self.omega1 - w * w).powi(2) + (2.0 * self.lambda * w).powi(2)).sqrt();
        let lead = (1.0 + (w / self.omega2).powi(2)).sqrt();
        let lag = ((1.0 + (w / self.omega3).powi(2)) * (1.0 + (w / self.omega4).powi(2))).sqrt();
        bp_num / bp_den * lead / lag
    }

    fn sections(&self, sample_rate: f64) -> [Biquad; 2] {
        let bandpass = Biquad::from_analog(
            [0.0, self.k * self.omega1, 0.0],
            [1.0, 2.0 * self.lambda, self.omega1 * self.omega1],
            sample_rate,
            PEAK_SENSITIVITY_HZ,
        );
        let lead_lag = Biquad::from_analog(
            [0.0, 1.0 / self.omega2, 1.0],
            [
                1.0 / (self.omega3 * self.omega4),
                1.0 / self.omega3 + 1.0 / self.omega4,
                1.0,
            ],
            sample_rate,
            PEAK_SENSITIVITY_HZ,
        );
        [bandpass, lead_lag]
    }
}

impl Default for WeightingConstants {
    fn default() -> Self {
        Self::LAMP_230V_50HZ
    }
}

/// Block 1: divides the input by its tracked rms.
///
/// The tracker is a first-order low-pass on the squared input. Its smoothing
/// factor starts at `1/n` (a running mean) and relaxes to the configured
/// time constant, so the output is normalized from the first period on.
#[derive(Debug, Clone)]
pub struct Normalizer {
    alpha: f64,
    mean_square: f64,
    seen: u64,
}

impl Normalizer {
    pub fn new(time_constant: f64, sample_rate: f64) -> Result<Self> {
        if !(time_constant.is_finite() && time_constant > 0.0) {
            return Err(Error::invalid(
                "normalization_time_constant",
                format!("{time_constant} must be > 0"),
            ));
        }
        Ok(Self {
            alpha: 1.0 - (-1.0 / (time_constant * sample_rate)).exp(),
            mean_square: 0.0,
            seen: 0,
        })
    }

    pub fn tracked_rms(&self) -> f64 {
        self.mean_square.sqrt()
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite { index: self.seen });
        }
        self.seen += 1;
        let alpha = (1.0 / self.seen as f64).max(self.alpha);
        self.mean_square += alpha * (x * x - self.mean_square);
        Ok(if self.mean_square > 0.0 {
            x / self.mean_square.sqrt()
        } else {
            0.0
        })
    }
}

/// Block 3: 0.05 Hz high-pass, 35 Hz sixth-order Butterworth and the lamp
/// weighting filter.
#[derive(Debug, Clone)]
pub struct WeightingCascade {
    highpass: Cascade,
    lowpass: Cascade,
    weighting: Cascade,
}

impl WeightingCascade {
    pub fn new(sample_rate: f64, constants: &WeightingConstants) -> Result<Self> {
        Ok(Self {
            highpass: Cascade::new("high-pass", vec![first_order_highpass(HIGHPASS_HZ, sample_rate)])?,
            lowpass: Cascade::new(
                "butterworth",
                butterworth_lowpass(BUTTERWORTH_ORDER, BUTTERWORTH_HZ, sample_rate),
            )?,
            weighting: Cascade::new("weighting", constants.sections(sample_rate).to_vec())?,
        })
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.highpass.process(x);
        let y = self.lowpass.process(y);
        self.weighting.process(y)
    }

    /// Digital magnitude response of the whole cascade.
    pub fn magnitude(&self, freq: f64, sample_rate: f64) -> f64 {
        self.highpass.magnitude(freq, sample_rate)
            * self.lowpass.magnitude(freq, sample_rate)
            * self.weighting.magnitude(freq, sample_rate)
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        [&self.highpass, &self.lowpass, &self.weighting]
            .iter()
            .map(|c| c.max_pole_magnitude())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.highpass.is_finite() && self.lowpass.is_finite() && self.weighting.is_finite()
    }
}

/// Block 4: square, first-order low-pass, calibration gain.
#[derive(Debug, Clone)]
pub struct Smoother {
    lowpass: Cascade,
    gain: f64,
}

impl Smoother {
    pub fn new(sample_rate: f64, gain: f64) -> Result<Self> {
        Ok(Self {
            lowpass: Cascade::new(
                "smoothing",
                vec![first_order_lowpass(SMOOTHING_TIME_CONSTANT, sample_rate)],
            )?,
            gain,
        })
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        // the bilinear low-pass can ring slightly below zero on steps
        (self.gain * self.lowpass.process(x * x)).max(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.lowpass.is_finite()
    }
}

fn map_buffer(signal: &SignalBuffer, f: impl FnMut(f64) -> Result<f64>) -> Result<SignalBuffer> {
    let out = signal.samples().iter().copied().map(f).collect::<Result<Vec<_>>>()?;
    Ok(SignalBuffer::with_unit(out, signal.sample_rate(), crate::signal::Unit::Dimensionless)?
        .with_t0(signal.t0()))
}

pub fn block1_normalize(signal: &SignalBuffer, state: &mut Normalizer) -> Result<SignalBuffer> {
    map_buffer(signal, |x| state.process(x))
}

pub fn block2_square(signal: &SignalBuffer) -> SignalBuffer {
    map_buffer(signal, |x| Ok(x * x)).expect("squaring cannot fail")
}

pub fn block3_weight(signal: &SignalBuffer, state: &mut WeightingCascade) -> Result<SignalBuffer> {
    map_buffer(signal, |x| Ok(state.process(x)))
}

pub fn block4_smooth(signal: &SignalBuffer, state: &mut Smoother) -> Result<SignalBuffer> {
    map_buffer(signal, |x| Ok(state.process(x)))
}
