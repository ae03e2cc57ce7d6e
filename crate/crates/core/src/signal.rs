//! Test-signal synthesis.
//!
//! The supply voltage before any fluctuation source is modelled as a cosine
//! hard-clipped at a fraction `m_c` of its amplitude and rescaled to a target
//! rms. Fluctuations are modelled as amplitude modulation without suppressed
//! carrier:
//!
//! ```text
//! u_in(t) = (1 + depth / 200 * u_mod(t)) * u_c(t)
//! ```
//!
//! where `u_mod` is a normalized waveform in `[-1, 1]` and `depth` is the
//! peak-to-peak relative envelope variation in percent.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples per period accepted by the synthesizers.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 20.0;

/// Default synthesis rate used ahead of the band-limiting front end.
pub const DEFAULT_SYNTHESIS_RATE: f64 = 80_000.0;

/// Default harmonic count for [`thd`].
pub const DEFAULT_THD_HARMONICS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    Volts,
    Dimensionless,
}

/// A uniformly sampled real waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBuffer {
    samples: Vec<f64>,
    sample_rate: f64,
    t0: f64,
    unit: Unit,
    bandwidth: Option<f64>,
}

impl SignalBuffer {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        Self::with_unit(samples, sample_rate, Unit::Volts)
    }

    pub fn with_unit(samples: Vec<f64>, sample_rate: f64, unit: Unit) -> Result<Self> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid("sample_rate", format!("{sample_rate} must be > 0")));
        }
        Ok(Self {
            samples,
            sample_rate,
            t0: 0.0,
            unit,
            bandwidth: None,
        })
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Marks the buffer as band-limited to `hz`. Set by the front-end filter and
    /// checked by decimation.
    pub fn with_bandwidth(mut self, hz: Option<f64>) -> Self {
        self.bandwidth = hz;
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sample_rate
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }

    /// Multiplies every sample by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.samples.iter_mut().for_each(|x| *x *= k);
        out
    }

    /// Writes headerless `time_s,value` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, x) in self.samples.iter().enumerate() {
            writeln!(w, "{},{}", self.time_at(i), x)?;
        }
        w.flush()
    }

    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    /// Reads headerless `time_s,value` rows. The sample rate is inferred from
    /// the first two time stamps.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::io("<csv>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                    Error::invalid("waveform csv", format!("malformed row {}", lineno + 1))
                })
            };
            times.push(parse(parts.next())?);
            values.push(parse(parts.next())?);
        }
        if times.len() < 2 {
            return Err(Error::invalid("waveform csv", "need at least two rows"));
        }
        let rate = 1.0 / (times[1] - times[0]);
        Ok(Self::new(values, rate)?.with_t0(times[0]))
    }

    /// Little-endian frame: `f64` sample rate, `u64` count, `count` × `f64`.
    pub fn write_frame<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.sample_rate.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for x in &self.samples {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    }

    pub fn read_frame<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word).map_err(|e| Error::io("<frame>", e))?;
            Ok(word)
        };
        let rate = f64::from_le_bytes(next(&mut r)?);
        let count = u64::from_le_bytes(next(&mut r)?) as usize;
        let mut samples = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            samples.push(f64::from_le_bytes(next(&mut r)?));
        }
        Self::new(samples, rate)
    }

    pub fn export_frame(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_frame(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn import_frame(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_frame(BufReader::new(file))
    }
}

/// Distorted supply voltage before any fluctuation source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierSpec {
    /// Fundamental frequency in Hz.
    #[serde(default = "default_fc")]
    pub f_c: f64,
    /// Target rms in V.
    #[serde(default = "default_uc")]
    pub u_c: f64,
    /// Clipping level: post-clip over pre-clip amplitude. 1 is a pure sinusoid.
    pub m_c: f64,
}

fn default_fc() -> f64 {
    50.0
}

fn default_uc() -> f64 {
    230.0
}

impl Default for CarrierSpec {
    fn default() -> Self {
        Self {
            f_c: 50.0,
            u_c: 230.0,
            m_c: 1.0,
        }
    }
}

impl CarrierSpec {
    pub fn new(f_c: f64, u_c: f64, m_c: f64) -> Result<Self> {
        let spec = Self { f_c, u_c, m_c };
        spec.validate()?;
        Ok(spec)
    }

    /// 50 Hz, 230 V rms carrier clipped at `m_c`.
    pub fn lv(m_c: f64) -> Result<Self> {
        Self::new(50.0, 230.0, m_c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_c.is_finite() && self.f_c > 0.0) {
            return Err(Error::invalid("f_c", format!("{} must be > 0", self.f_c)));
        }
        if !(self.u_c.is_finite() && self.u_c > 0.0) {
            return Err(Error::invalid("u_c", format!("{} must be > 0", self.u_c)));
        }
        if !(self.m_c > 0.0 && self.m_c <= 1.0) {
            return Err(Error::invalid(
                "m_c",
                format!("{} outside the clipping range (0, 1]", self.m_c),
            ));
        }
        Ok(())
    }

    /// Mean square of the unit cosine clipped at `±m_c`, over one period.
    pub fn unit_mean_square(&self) -> f64 {
        clipped_cosine_mean_square(self.m_c)
    }
}

/// Closed form of `mean(min(cos²θ, m²))` over a period.
pub fn clipped_cosine_mean_square(m: f64) -> f64 {
    if m >= 1.0 {
        return 0.5;
    }
    let theta0 = m.acos();
    2.0 / PI * (m * m * theta0 + (PI / 2.0 - theta0) / 2.0 - (2.0 * theta0).sin() / 4.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Shape {
    #[serde(rename = "sin", alias = "sinusoidal")]
    Sinusoidal,
    #[serde(rename = "tri", alias = "triangular")]
    Triangular,
    #[serde(rename = "trap", alias = "trapezoidal")]
    Trapezoidal,
    #[serde(rename = "rect", alias = "rectangular")]
    Rectangular,
}

impl Shape {
    pub const ALL: [Shape; 4] = [
        Shape::Sinusoidal,
        Shape::Triangular,
        Shape::Trapezoidal,
        Shape::Rectangular,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            Shape::Sinusoidal => "sin",
            Shape::Triangular => "tri",
            Shape::Trapezoidal => "trap",
            Shape::Rectangular => "rect",
        }
    }

    /// Waveform value at cycle position `p ∈ [0, 1)`.
    ///
    /// Every shape starts at the beginning of its rising segment; the
    /// rectangle starts at the beginning of its high half.
    pub fn value(self, p: f64) -> f64 {
        match self {
            Shape::Sinusoidal => (2.0 * PI * p).sin(),
            Shape::Triangular => {
                if p < 0.5 {
                    -1.0 + 4.0 * p
                } else {
                    3.0 - 4.0 * p
                }
            }
            // rise, high plateau, fall, low plateau: a quarter period each
            Shape::Trapezoidal => {
                if p < 0.25 {
                    -1.0 + 8.0 * p
                } else if p < 0.5 {
                    1.0
                } else if p < 0.75 {
                    1.0 - 8.0 * (p - 0.5)
                } else {
                    -1.0
                }
            }
            Shape::Rectangular => {
                if p < 0.5 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sin" | "sine" | "sinusoidal" => Ok(Shape::Sinusoidal),
            "tri" | "triangle" | "triangular" => Ok(Shape::Triangular),
            "trap" | "trapezoid" | "trapezoidal" => Ok(Shape::Trapezoidal),
            "rect" | "rectangle" | "rectangular" | "square" => Ok(Shape::Rectangular),
            other => Err(Error::invalid(
                "shape",
                format!("unknown shape {other:?} (expected sin, tri, trap or rect)"),
            )),
        }
    }
}

/// Voltage-fluctuation description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulatingSpec {
    pub shape: Shape,
    /// Modulating frequency in Hz.
    pub f_m: f64,
    /// Modulation depth ΔU/U in percent (peak to peak).
    pub depth: f64,
    /// Initial phase as a fraction of the modulating period.
    #[serde(default)]
    pub phase: f64,
}

impl ModulatingSpec {
    pub fn new(shape: Shape, f_m: f64, depth: f64) -> Result<Self> {
        let spec = Self {
            shape,
            f_m,
            depth,
            phase: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_m.is_finite() && self.f_m > 0.0) {
            return Err(Error::invalid("f_m", format!("{} must be > 0", self.f_m)));
        }
        validate_depth(self.depth)?;
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase", "must be finite"));
        }
        Ok(())
    }

    pub fn period(&self) -> f64 {
        1.0 / self.f_m
    }
}

fn validate_depth(depth: f64) -> Result<()> {
    if !(depth.is_finite() && (0.0..200.0).contains(&depth)) {
        return Err(Error::invalid(
            "depth",
            format!("{depth} outside [0, 200) percent; the envelope would cross zero"),
        ));
    }
    Ok(())
}

/// Returns the period in samples when it is an integer.
fn integral_period(sample_rate: f64, freq: f64) -> Option<u64> {
    let period = sample_rate / freq;
    let rounded = period.round();
    ((period - rounded).abs() <= 1e-9 * period && rounded >= 1.0).then_some(rounded as u64)
}

/// Cycle position of sample `n`, in `[0, 1)`. Sample-aligned periods are
/// reduced in integer arithmetic so the waveform repeats bit-exactly.
fn cycle_position(n: u64, freq: f64, sample_rate: f64, offset: f64, period: Option<u64>) -> f64 {
    let (n, denom) = match period {
        Some(p) => ((n % p) as f64, p as f64),
        None => (n as f64, sample_rate / freq),
    };
    let p = (n / denom + offset).rem_euclid(1.0);
    if p >= 1.0 {
        0.0
    } else {
        p
    }
}

fn check_rate(field: &'static str, sample_rate: f64, freq: f64) -> Result<()> {
    if !(sample_rate.is_finite() && sample_rate >= MIN_SAMPLES_PER_PERIOD * freq) {
        return Err(Error::invalid(
            field,
            format!(
                "sample rate {sample_rate} Hz is below {MIN_SAMPLES_PER_PERIOD} samples per period of {freq} Hz"
            ),
        ));
    }
    Ok(())
}

fn sample_count(duration: f64, sample_rate: f64) -> Result<usize> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("duration", format!("{duration} must be > 0")));
    }
    Ok((duration * sample_rate).round() as usize)
}

/// Sample-by-sample carrier source, usable for chunked synthesis.
#[derive(Debug, Clone)]
pub struct CarrierGenerator {
    spec: CarrierSpec,
    sample_rate: f64,
    scale: f64,
    period: Option<u64>,
}

impl CarrierGenerator {
    pub fn new(spec: CarrierSpec, sample_rate: f64) -> Result<Self> {
        spec.validate()?;
        check_rate("sample_rate", sample_rate, spec.f_c)?;
        let period = integral_period(sample_rate, spec.f_c);
        let mean_square = match period {
            // discrete mean over one sampled period makes the rms exact for
            // any whole-period buffer
            Some(p) => {
                (0..p)
                    .map(|n| {
                        let v = Self::unit_value(spec.m_c, n as f64 / p as f64);
                        v * v
                    })
                    .sum::<f64>()
                    / p as f64
            }
            None => spec.unit_mean_square(),
        };
        Ok(Self {
            spec,
            sample_rate,
            scale: spec.u_c / mean_square.sqrt(),
            period,
        })
    }

    fn unit_value(m_c: f64, p: f64) -> f64 {
        let c = (2.0 * PI * p).cos();
        if m_c < 1.0 {
            c.clamp(-m_c, m_c)
        } else {
            c
        }
    }

    pub fn sample(&self, n: u64) -> f64 {
        let p = cycle_position(n, self.spec.f_c, self.sample_rate, 0.0, self.period);
        self.scale * Self::unit_value(self.spec.m_c, p)
    }

    pub fn fill(&self, start: u64, out: &mut [f64]) {
        for (i, x) in out.iter_mut().enumerate() {
            *x = self.sample(start + i as u64);
        }
    }

    /// Peak value after rescaling.
    pub fn peak(&self) -> f64 {
        self.scale * self.spec.m_c
    }
}

/// Sample-by-sample normalized modulating waveform.
#[derive(Debug, Clone)]
pub struct ModulatingGenerator {
    spec: ModulatingSpec,
    sample_rate: f64,
    period: Option<u64>,
}

impl ModulatingGenerator {
    pub fn new(spec: ModulatingSpec, sample_rate: f64) -> Result<Self> {
        spec.validate()?;
        check_rate("sample_rate", sample_rate, spec.f_m)?;
        Ok(Self {
            spec,
            sample_rate,
            period: integral_period(sample_rate, spec.f_m),
        })
    }

    pub fn sample(&self, n: u64) -> f64 {
        let p = cycle_position(n, self.spec.f_m, self.sample_rate, self.spec.phase, self.period);
        self.spec.shape.value(p)
    }

    pub fn fill(&self, start: u64, out: &mut [f64]) {
        for (i, x) in out.iter_mut().enumerate() {
            *x = self.sample(start + i as u64);
        }
    }

    pub fn spec(&self) -> &ModulatingSpec {
        &self.spec
    }
}

/// Cosine clipped at `±m_c` of its pre-clip amplitude, rescaled to rms `u_c`.
pub fn synthesize_carrier(spec: &CarrierSpec, sample_rate: f64, duration: f64) -> Result<SignalBuffer> {
    let generator = CarrierGenerator::new(*spec, sample_rate)?;
    let n = sample_count(duration, sample_rate)?;
    if (n as f64) < sample_rate / spec.f_c - 1e-9 {
        return Err(Error::invalid(
            "duration",
            format!("{duration} s is shorter than one fundamental period"),
        ));
    }
    let mut samples = vec![0.0; n];
    generator.fill(0, &mut samples);
    SignalBuffer::new(samples, sample_rate)
}

/// Normalized `u_mod(t)` in `[-1, 1]`.
pub fn synthesize_modulating(spec: &ModulatingSpec, sample_rate: f64, duration: f64) -> Result<SignalBuffer> {
    let generator = ModulatingGenerator::new(*spec, sample_rate)?;
    let n = sample_count(duration, sample_rate)?;
    let mut samples = vec![0.0; n];
    generator.fill(0, &mut samples);
    SignalBuffer::with_unit(samples, sample_rate, Unit::Dimensionless)
}

/// In-place form of [`modulate`] for chunked pipelines.
pub fn modulate_in_place(carrier: &mut [f64], modulating: &[f64], depth: f64) -> Result<()> {
    validate_depth(depth)?;
    if carrier.len() != modulating.len() {
        return Err(Error::LengthMismatch {
            left: carrier.len(),
            right: modulating.len(),
        });
    }
    let k = depth / 200.0;
    for (c, m) in carrier.iter_mut().zip(modulating) {
        *c *= 1.0 + k * m;
    }
    Ok(())
}

/// `u_in = (1 + depth·u_mod/200)·u_c`, pointwise.
pub fn modulate(carrier: &SignalBuffer, modulating: &SignalBuffer, depth: f64) -> Result<SignalBuffer> {
    if carrier.sample_rate != modulating.sample_rate {
        return Err(Error::RateMismatch {
            expected: carrier.sample_rate,
            actual: modulating.sample_rate,
        });
    }
    let mut out = carrier.clone();
    modulate_in_place(&mut out.samples, &modulating.samples, depth)?;
    Ok(out)
}

/// Peak amplitudes of harmonics `1..=n` from a DFT synchronized to `f_c`.
///
/// The buffer must span an integer number of fundamental periods. Harmonics
/// at or above Nyquist are reported as zero.
pub fn harmonic_amplitudes(signal: &SignalBuffer, f_c: f64, n_harmonics: usize) -> Result<Vec<f64>> {
    let len = signal.len();
    let periods = len as f64 * f_c / signal.sample_rate;
    let whole = periods.round();
    if whole < 1.0 || (periods - whole).abs() > 1e-6 {
        return Err(Error::NonIntegerPeriods { periods });
    }
    let whole = whole as u64;
    let n_len = len as u64;
    let x = signal.samples();
    let amplitudes = (1..=n_harmonics as u64)
        .map(|h| {
            if h as f64 * f_c >= signal.sample_rate / 2.0 {
                return 0.0;
            }
            let bin = h * whole;
            let (mut re, mut im) = (0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let phase = 2.0 * PI * ((bin * n as u64) % n_len) as f64 / n_len as f64;
                re += v * phase.cos();
                im -= v * phase.sin();
            }
            2.0 * (re * re + im * im).sqrt() / len as f64
        })
        .collect();
    Ok(amplitudes)
}

/// Total harmonic distortion `sqrt(Σ_{h=2..n} U_h²) / U_1`.
pub fn thd(signal: &SignalBuffer, f_c: f64, n_harmonics: usize) -> Result<f64> {
    if n_harmonics < 2 {
        return Err(Error::invalid("n_harmonics", "need at least 2"));
    }
    let amps = harmonic_amplitudes(signal, f_c, n_harmonics)?;
    let fundamental = amps[0];
    if fundamental <= 0.0 {
        return Err(Error::invalid("signal", "no fundamental component"));
    }
    let harmonics: f64 = amps[1..].iter().map(|a| a * a).sum();
    Ok(harmonics.sqrt() / fundamental)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const FS: f64 = 80_000.0;

    fn one_period(m_c: f64) -> SignalBuffer {
        synthesize_carrier(&CarrierSpec::lv(m_c).unwrap(), FS, 0.02).unwrap()
    }

    #[test]
    fn pure_carrier_is_unclipped_cosine() {
        let buf = synthesize_carrier(&CarrierSpec::lv(1.0).unwrap(), FS, 0.1).unwrap();
        let peak = 230.0 * 2f64.sqrt();
        for (i, x) in buf.samples().iter().enumerate() {
            let expected = peak * (2.0 * PI * 50.0 * i as f64 / FS).cos();
            assert!((x - expected).abs() < 1e-9, "sample {i}: {x} vs {expected}");
        }
        assert_relative_eq!(buf.rms(), 230.0, max_relative = 1e-12);
        assert!(thd(&buf, 50.0, 40).unwrap() < 1e-9);
    }

    #[test]
    fn carrier_thd_anchors() {
        let thd08 = thd(&one_period(0.8), 50.0, DEFAULT_THD_HARMONICS).unwrap();
        let thd01 = thd(&one_period(0.1), 50.0, DEFAULT_THD_HARMONICS).unwrap();
        assert!((thd08 - 0.08).abs() <= 0.01, "m_c=0.8 THD {thd08}");
        assert!((thd01 - 0.43).abs() <= 0.02, "m_c=0.1 THD {thd01}");
    }

    #[test]
    fn square_wave_thd_matches_odd_series() {
        // oracle: odd-harmonic series of an ideal square wave
        let oracle = (PI * PI / 8.0 - 1.0).sqrt();
        assert_relative_eq!(oracle, 0.4834, epsilon = 1e-4);
        // 2000 samples per period with the discontinuities between samples
        let n = 2000;
        let samples: Vec<f64> = (0..n)
            .map(|i| if (i as f64 + 0.5) / (n as f64) < 0.5 { 1.0 } else { -1.0 })
            .collect();
        let buf = SignalBuffer::new(samples, 50.0 * n as f64).unwrap();
        let truncated: f64 = (1..=499)
            .map(|k| 2 * k + 1)
            .map(|k| 1.0 / (k * k) as f64)
            .sum::<f64>()
            .sqrt();
        let measured = thd(&buf, 50.0, 999).unwrap();
        assert!((measured - truncated).abs() < 2e-3, "{measured} vs {truncated}");
        assert!((measured - oracle).abs() < 0.01);
    }

    #[test]
    fn thd_rejects_partial_periods() {
        let buf = synthesize_carrier(&CarrierSpec::lv(0.8).unwrap(), FS, 0.025).unwrap();
        assert!(matches!(thd(&buf, 50.0, 40), Err(Error::NonIntegerPeriods { .. })));
        assert!(thd(&one_period(0.8), 50.0, 1).is_err());
    }

    #[test]
    fn carrier_rejects_bad_inputs() {
        for m in [0.0, -0.1, 1.01, f64::NAN] {
            let spec = CarrierSpec { m_c: m, ..CarrierSpec::default() };
            assert!(synthesize_carrier(&spec, FS, 0.02).is_err());
        }
        assert!(synthesize_carrier(&CarrierSpec::default(), 500.0, 0.1).is_err());
        assert!(synthesize_carrier(&CarrierSpec::default(), FS, 0.01).is_err());
    }

    #[test]
    fn analytic_mean_square_matches_sampled() {
        for m in [0.05, 0.1, 0.3, 0.8, 0.99, 1.0] {
            let n = 200_000;
            let sampled = (0..n)
                .map(|i| {
                    let c = (2.0 * PI * i as f64 / n as f64).cos().clamp(-m, m);
                    c * c
                })
                .sum::<f64>()
                / n as f64;
            assert_relative_eq!(clipped_cosine_mean_square(m), sampled, max_relative = 1e-8);
        }
    }

    #[test]
    fn non_integral_rate_uses_analytic_rms() {
        let spec = CarrierSpec::lv(0.8).unwrap();
        let buf = synthesize_carrier(&spec, 77_777.0, 2.0).unwrap();
        assert_relative_eq!(buf.rms(), 230.0, max_relative = 1e-5);
    }

    #[test]
    fn rectangle_plateaus_are_exact() {
        let spec = ModulatingSpec::new(Shape::Rectangular, 10.0, 5.0).unwrap();
        let buf = synthesize_modulating(&spec, 1000.0, 1.0).unwrap();
        assert!(buf.samples().iter().all(|&v| v == 1.0 || v == -1.0));
        assert_eq!(buf.samples()[0], 1.0);
        assert_eq!(buf.samples()[50], -1.0);
    }

    #[test]
    fn trapezoid_segments() {
        let spec = ModulatingSpec::new(Shape::Trapezoidal, 1.0, 5.0).unwrap();
        let buf = synthesize_modulating(&spec, 1000.0, 1.0).unwrap();
        let s = buf.samples();
        assert_eq!(s[0], -1.0);
        assert!(s[125].abs() < 1e-12);
        assert!(s[250..500].iter().all(|&v| v == 1.0));
        assert!(s[625].abs() < 1e-12);
        assert!(s[750..].iter().all(|&v| v == -1.0));
    }

    #[test]
    fn triangle_period_stats() {
        let spec = ModulatingSpec::new(Shape::Triangular, 2.0, 1.0).unwrap();
        let buf = synthesize_modulating(&spec, 1000.0, 0.5).unwrap();
        let s = buf.samples();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let max = s.iter().cloned().fold(f64::MIN, f64::max);
        let min = s.iter().cloned().fold(f64::MAX, f64::min);
        assert!(mean.abs() < 1e-12);
        assert_eq!(max - min, 2.0);
    }

    #[test]
    fn modulating_rejects_bad_inputs() {
        assert!(ModulatingSpec::new(Shape::Sinusoidal, 0.0, 5.0).is_err());
        assert!(ModulatingSpec::new(Shape::Sinusoidal, 10.0, -1.0).is_err());
        assert!("saw".parse::<Shape>().is_err());
        let spec = ModulatingSpec::new(Shape::Sinusoidal, 100.0, 5.0).unwrap();
        assert!(synthesize_modulating(&spec, 1000.0, 1.0).is_err());
    }

    #[test]
    fn modulation_examples() {
        let carrier = SignalBuffer::new(vec![1.0, 2.0, -3.0], 10.0).unwrap();
        let ones = SignalBuffer::with_unit(vec![1.0, -1.0, 0.5], 10.0, Unit::Dimensionless).unwrap();
        assert_eq!(modulate(&carrier, &ones, 0.0).unwrap(), carrier);
        let out = modulate(&carrier, &ones, 10.0).unwrap();
        assert_relative_eq!(out.samples()[0], 1.05, epsilon = 1e-15);
        assert_relative_eq!(out.samples()[1], 1.9, epsilon = 1e-15);
        assert_relative_eq!(out.samples()[0] / 1.0 / (out.samples()[1] / 2.0), 1.05 / 0.95, epsilon = 1e-14);
        assert!(modulate(&carrier, &ones, 200.0).is_err());
        assert!(modulate(&carrier, &ones, -0.1).is_err());
        let short = SignalBuffer::new(vec![1.0], 10.0).unwrap();
        assert!(matches!(modulate(&carrier, &short, 1.0), Err(Error::LengthMismatch { .. })));
        let other_rate = SignalBuffer::new(vec![1.0, 1.0, 1.0], 20.0).unwrap();
        assert!(matches!(modulate(&carrier, &other_rate, 1.0), Err(Error::RateMismatch { .. })));
    }

    #[test]
    fn frame_and_csv_round_trip() {
        let buf = synthesize_carrier(&CarrierSpec::lv(0.8).unwrap(), 2000.0, 0.02).unwrap();
        let mut bytes = Vec::new();
        buf.write_frame(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * buf.len());
        assert_eq!(&bytes[0..8], &2000f64.to_le_bytes());
        assert_eq!(SignalBuffer::read_frame(&bytes[..]).unwrap(), buf);

        let mut text = Vec::new();
        buf.write_csv(&mut text).unwrap();
        let back = SignalBuffer::read_csv(&text[..]).unwrap();
        assert_eq!(back.samples(), buf.samples());
        assert_relative_eq!(back.sample_rate(), 2000.0, max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn envelope_identity(depth in 0.0f64..199.0, shape_idx in 0usize..4, fm in 0.5f64..200.0, m_c in 0.05f64..=1.0) {
            let fs = 20_000.0;
            let carrier = synthesize_carrier(&CarrierSpec::lv(m_c).unwrap(), fs, 0.05).unwrap();
            let spec = ModulatingSpec::new(Shape::ALL[shape_idx], fm, depth).unwrap();
            let modulating = synthesize_modulating(&spec, fs, 0.05).unwrap();
            let out = modulate(&carrier, &modulating, depth).unwrap();
            let (lo, hi) = (1.0 - depth / 200.0, 1.0 + depth / 200.0);
            for (u, c) in out.samples().iter().zip(carrier.samples()) {
                if c.abs() > 1e-9 {
                    let r = u / c;
                    prop_assert!(r >= lo - 1e-12 && r <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn carrier_rms_is_exact(m_c in 0.01f64..=1.0, periods in 1usize..5) {
            let buf = synthesize_carrier(&CarrierSpec::lv(m_c).unwrap(), FS, 0.02 * periods as f64).unwrap();
            prop_assert!((buf.rms() / 230.0 - 1.0).abs() < 1e-6);
        }

        #[test]
        fn thd_non_increasing_in_clip_level(a in 0.02f64..1.0, b in 0.02f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let t_lo = thd(&one_period(lo), 50.0, 40).unwrap();
            let t_hi = thd(&one_period(hi), 50.0, 40).unwrap();
            prop_assert!(t_hi <= t_lo + 1e-9);
        }

        #[test]
        fn modulating_zero_mean_and_periodic(shape_idx in 0usize..4, period_samples in 20u64..400, periods in 1u64..4) {
            let fs = 10_000.0;
            let fm = fs / period_samples as f64;
            let spec = ModulatingSpec::new(Shape::ALL[shape_idx], fm, 1.0).unwrap();
            let generator = ModulatingGenerator::new(spec, fs).unwrap();
            let n = period_samples * periods;
            let mut s = vec![0.0; n as usize];
            generator.fill(0, &mut s);
            let mean = s.iter().sum::<f64>() / n as f64;
            // exact only when every corner lands on a sample
            let tol = if period_samples % 4 == 0 { 1e-9 } else { 1.0 / period_samples as f64 + 1e-12 };
            prop_assert!(mean.abs() <= tol, "{mean}");
            prop_assert!(s.iter().all(|v| v.abs() <= 1.0));
            for i in 0..period_samples {
                prop_assert_eq!(generator.sample(i), generator.sample(i + period_samples * 7));
            }
        }
    }

    #[test]
    fn modulating_extrema_are_unit() {
        for shape in Shape::ALL {
            let spec = ModulatingSpec::new(shape, 10.0, 1.0).unwrap();
            let buf = synthesize_modulating(&spec, 4000.0, 0.1).unwrap();
            let max = buf.samples().iter().cloned().fold(f64::MIN, f64::max);
            let min = buf.samples().iter().cloned().fold(f64::MAX, f64::min);
            assert_eq!((max, min), (1.0, -1.0), "{shape}");
        }
    }
}
