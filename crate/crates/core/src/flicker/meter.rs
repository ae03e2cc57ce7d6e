use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::blocks::{Normalizer, Smoother, WeightingCascade, WeightingConstants, PINST_GAIN};
use super::classifier::{block5_classify, PstReading};
use crate::error::{Error, Result};
use crate::signal::SignalBuffer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum LampReference {
    #[default]
    #[serde(rename = "230V_50Hz")]
    Lamp230V50Hz,
}

impl LampReference {
    pub fn weighting(self) -> WeightingConstants {
        match self {
            LampReference::Lamp230V50Hz => WeightingConstants::LAMP_230V_50HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlickermeterConfig {
    pub lamp_reference: LampReference,
    /// Rate of the voltage samples pushed into block 1, Hz.
    pub input_rate: f64,
    /// Rate at which P_inst is stored for classification, Hz.
    pub classifier_rate: f64,
    /// Observation window, s.
    pub window: f64,
    /// Prefix discarded before the window starts, s.
    pub settle: f64,
    /// Block 1 rms tracker time constant, s.
    pub normalization_time_constant: f64,
}

impl Default for FlickermeterConfig {
    fn default() -> Self {
        Self {
            lamp_reference: LampReference::Lamp230V50Hz,
            input_rate: 20_000.0,
            classifier_rate: 500.0,
            window: 600.0,
            settle: 30.0,
            normalization_time_constant: 60.0,
        }
    }
}

impl FlickermeterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.input_rate >= 2_000.0) {
            return Err(Error::invalid("input_rate", format!("{} Hz is below 2 kHz", self.input_rate)));
        }
        if !(self.classifier_rate >= 50.0) {
            return Err(Error::invalid(
                "classifier_rate",
                format!("{} Hz is below 50 Hz", self.classifier_rate),
            ));
        }
        let stride = self.input_rate / self.classifier_rate;
        if (stride - stride.round()).abs() > 1e-9 || stride < 1.0 {
            return Err(Error::invalid(
                "classifier_rate",
                format!("{} Hz must divide the input rate {} Hz", self.classifier_rate, self.input_rate),
            ));
        }
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::invalid("window", format!("{} must be > 0", self.window)));
        }
        if !(self.settle >= 0.0 && self.settle.is_finite()) {
            return Err(Error::invalid("settle", format!("{} must be >= 0", self.settle)));
        }
        if !(self.normalization_time_constant > 0.0) {
            return Err(Error::invalid("normalization_time_constant", "must be > 0"));
        }
        Ok(())
    }

    pub fn stride(&self) -> u64 {
        (self.input_rate / self.classifier_rate).round() as u64
    }

    pub fn window_samples(&self) -> usize {
        (self.window * self.classifier_rate).round() as usize
    }

    pub fn settle_samples(&self) -> u64 {
        (self.settle * self.input_rate).round() as u64
    }

    /// Input samples needed for one full reading.
    pub fn required_input_samples(&self) -> u64 {
        self.settle_samples() + self.window_samples() as u64 * self.stride()
    }
}

/// Streaming flickermeter. Push voltage samples in any chunking; P_inst is
/// stored at the classifier rate once the settling prefix has passed.
///
/// A state instance processes one stream and is not shared between threads
/// while pushing.
#[derive(Debug, Clone)]
pub struct FlickermeterState {
    config: FlickermeterConfig,
    normalizer: Normalizer,
    weighting: WeightingCascade,
    smoother: Smoother,
    counter: u64,
    stride: u64,
    settle_samples: u64,
    p_inst: Vec<f64>,
}

impl FlickermeterState {
    pub fn new(config: FlickermeterConfig) -> Result<Self> {
        Self::with_parts(config, &config.lamp_reference.weighting(), PINST_GAIN)
    }

    /// Meter with explicit weighting constants and block 4 gain, for
    /// calibration and fault injection.
    pub fn with_parts(config: FlickermeterConfig, weighting: &WeightingConstants, gain: f64) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            normalizer: Normalizer::new(config.normalization_time_constant, config.input_rate)?,
            weighting: WeightingCascade::new(config.input_rate, weighting)?,
            smoother: Smoother::new(config.input_rate, gain)?,
            counter: 0,
            stride: config.stride(),
            settle_samples: config.settle_samples(),
            p_inst: Vec::with_capacity(config.window_samples()),
            config,
        })
    }

    pub fn config(&self) -> &FlickermeterConfig {
        &self.config
    }

    pub fn weighting(&self) -> &WeightingCascade {
        &self.weighting
    }

    pub fn push(&mut self, samples: &[f64]) -> Result<()> {
        for &x in samples {
            let n = self.normalizer.process(x)?;
            let w = self.weighting.process(n * n);
            let p = self.smoother.process(w);
            if self.counter >= self.settle_samples && (self.counter - self.settle_samples) % self.stride == 0 {
                self.p_inst.push(p);
            }
            self.counter += 1;
        }
        if !(self.weighting.is_finite() && self.smoother.is_finite()) {
            return Err(Error::NonFinite { index: self.counter });
        }
        Ok(())
    }

    /// Stored P_inst samples (post-settle, classifier rate).
    pub fn p_inst(&self) -> &[f64] {
        &self.p_inst
    }

    pub fn samples_pushed(&self) -> u64 {
        self.counter
    }

    /// Pst over the first window after settling.
    pub fn pst(&self) -> Result<PstReading> {
        block5_classify(&self.p_inst, self.config.window_samples())
    }

    /// Writes `time_s,p_inst` rows; time is measured from the stream start.
    pub fn write_p_inst_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time_s,p_inst")?;
        let t0 = self.config.settle_samples() as f64 / self.config.input_rate;
        for (i, p) in self.p_inst.iter().enumerate() {
            writeln!(w, "{},{}", t0 + i as f64 / self.config.classifier_rate, p)?;
        }
        w.flush()
    }

    pub fn dump_p_inst(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_p_inst_csv(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Runs blocks 1 to 5 over `signal`, discarding `config.settle` seconds.
pub fn measure_pst(signal: &SignalBuffer, config: &FlickermeterConfig) -> Result<PstReading> {
    Ok(measure_pst_with_state(signal, config)?.0)
}

/// As [`measure_pst`], also returning the meter so its P_inst trace can be inspected.
pub fn measure_pst_with_state(
    signal: &SignalBuffer,
    config: &FlickermeterConfig,
) -> Result<(PstReading, FlickermeterState)> {
    config.validate()?;
    if signal.sample_rate() != config.input_rate {
        return Err(Error::RateMismatch {
            expected: config.input_rate,
            actual: signal.sample_rate(),
        });
    }
    let needed = config.required_input_samples();
    if (signal.len() as u64) < needed {
        return Err(Error::InsufficientSamples {
            needed: needed as usize,
            available: signal.len(),
        });
    }
    let mut state = FlickermeterState::new(*config)?;
    state.push(&signal.samples()[..needed as usize])?;
    Ok((state.pst()?, state))
}
