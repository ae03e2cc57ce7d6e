//! Acquisition front end: linear-phase FIR band limiting followed by
//! integer decimation to the flickermeter input rate.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalBuffer;

/// Hamming-windowed-sinc linear-phase low-pass filter.
#[derive(Debug, Clone, PartialEq)]
pub struct FirFilter {
    coefficients: Vec<f64>,
    order: usize,
    cutoff: f64,
    design_rate: f64,
}

impl FirFilter {
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn design_rate(&self) -> f64 {
        self.design_rate
    }

    /// Samples at each edge of [`apply_fir`] output that see zero padding.
    pub fn warmup_samples(&self) -> usize {
        self.order / 2
    }

    pub fn group_delay(&self) -> usize {
        self.order / 2
    }

    /// Magnitude response at `freq` Hz.
    pub fn magnitude(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / self.design_rate;
        let (re, im) = self
            .coefficients
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(re, im), (n, h)| {
                (re + h * (w * n as f64).cos(), im - h * (w * n as f64).sin())
            });
        (re * re + im * im).sqrt()
    }

    pub fn write_taps_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,coefficient")?;
        for (i, h) in self.coefficients.iter().enumerate() {
            writeln!(w, "{i},{h:e}")?;
        }
        w.flush()
    }

    pub fn export_taps_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_taps_csv(BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

pub fn design_lowpass_fir(order: usize, cutoff: f64, sample_rate: f64) -> Result<FirFilter> {
    if order == 0 || order % 2 != 0 {
        return Err(Error::invalid("order", format!("{order} must be even and > 0")));
    }
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::invalid("sample_rate", format!("{sample_rate} must be > 0")));
    }
    if !(cutoff > 0.0 && cutoff < sample_rate / 2.0) {
        return Err(Error::invalid(
            "cutoff",
            format!("{cutoff} Hz must lie in (0, {}) Hz", sample_rate / 2.0),
        ));
    }
    let fc = cutoff / sample_rate;
    let mid = (order / 2) as isize;
    let mut taps: Vec<f64> = (0..=order)
        .map(|n| {
            let k = (n as isize - mid) as f64;
            let sinc = if k == 0.0 {
                2.0 * fc
            } else {
                (2.0 * PI * fc * k).sin() / (PI * k)
            };
            let window = 0.54 - 0.46 * (2.0 * PI * n as f64 / order as f64).cos();
            sinc * window
        })
        .collect();
    let gain: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= gain);
    // mirror so the taps are bit-for-bit symmetric
    for n in 0..order / 2 {
        taps[order - n] = taps[n];
    }
    Ok(FirFilter {
        coefficients: taps,
        order,
        cutoff,
        design_rate: sample_rate,
    })
}

/// Zero-padded linear convolution, shifted by the group delay so the output
/// is time aligned with the input. The first and last
/// [`FirFilter::warmup_samples`] outputs see the padding.
pub fn apply_fir(signal: &SignalBuffer, filter: &FirFilter) -> Result<SignalBuffer> {
    if signal.sample_rate() != filter.design_rate {
        return Err(Error::RateMismatch {
            expected: filter.design_rate,
            actual: signal.sample_rate(),
        });
    }
    let x = signal.samples();
    let h = &filter.coefficients;
    let delay = filter.group_delay() as isize;
    let len = x.len() as isize;
    let out: Vec<f64> = (0..len)
        .map(|n| {
            h.iter()
                .enumerate()
                .filter_map(|(k, hk)| {
                    let idx = n + delay - k as isize;
                    (0..len).contains(&idx).then(|| hk * x[idx as usize])
                })
                .sum()
        })
        .collect();
    Ok(SignalBuffer::with_unit(out, signal.sample_rate(), signal.unit())?
        .with_t0(signal.t0())
        .with_bandwidth(Some(filter.cutoff)))
}

/// Keeps every `factor`-th sample. A buffer marked band-limited above the new
/// Nyquist frequency is rejected.
pub fn decimate(signal: &SignalBuffer, factor: usize) -> Result<SignalBuffer> {
    if factor == 0 {
        return Err(Error::invalid("factor", "must be >= 1"));
    }
    let new_rate = signal.sample_rate() / factor as f64;
    if let Some(bw) = signal.bandwidth() {
        if bw >= new_rate / 2.0 {
            return Err(Error::invalid(
                "factor",
                format!(
                    "decimation by {factor} puts {bw} Hz content above the new Nyquist frequency {} Hz",
                    new_rate / 2.0
                ),
            ));
        }
    }
    let samples = signal.samples().iter().step_by(factor).copied().collect();
    Ok(SignalBuffer::with_unit(samples, new_rate, signal.unit())?
        .with_t0(signal.t0())
        .with_bandwidth(signal.bandwidth()))
}

/// Synthesis rate and front-end settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub synthesis_rate: f64,
    pub fir_order: usize,
    pub cutoff: f64,
    pub decimation: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            synthesis_rate: crate::signal::DEFAULT_SYNTHESIS_RATE,
            fir_order: 200,
            cutoff: 8_000.0,
            decimation: 4,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.decimation == 0 {
            return Err(Error::invalid("decimation", "must be >= 1"));
        }
        design_lowpass_fir(self.fir_order, self.cutoff, self.synthesis_rate)?;
        if self.cutoff >= self.output_rate() / 2.0 {
            return Err(Error::invalid(
                "decimation",
                format!(
                    "factor {} leaves Nyquist {} Hz below the {} Hz cutoff",
                    self.decimation,
                    self.output_rate() / 2.0,
                    self.cutoff
                ),
            ));
        }
        Ok(())
    }

    pub fn output_rate(&self) -> f64 {
        self.synthesis_rate / self.decimation as f64
    }

    pub fn design(&self) -> Result<FirFilter> {
        self.validate()?;
        design_lowpass_fir(self.fir_order, self.cutoff, self.synthesis_rate)
    }
}

/// Streaming FIR + decimator. Computes only the retained outputs and is
/// causal: output `m` equals the compensated [`apply_fir`] output at input
/// index `m·factor − group_delay`.
#[derive(Debug, Clone)]
pub struct FirDecimator {
    taps: Vec<f64>,
    factor: usize,
    buffer: Vec<f64>,
    consumed: u64,
}

impl FirDecimator {
    pub fn new(filter: &FirFilter, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::invalid("factor", "must be >= 1"));
        }
        let taps = filter.coefficients.clone();
        Ok(Self {
            buffer: vec![0.0; taps.len() - 1],
            taps,
            factor,
            consumed: 0,
        })
    }

    pub fn from_config(config: &ChainConfig) -> Result<Self> {
        Self::new(&config.design()?, config.decimation)
    }

    pub fn process(&mut self, input: &[f64], out: &mut Vec<f64>) {
        let history = self.taps.len() - 1;
        self.buffer.extend_from_slice(input);
        let factor = self.factor as u64;
        let first = (factor - self.consumed % factor) % factor;
        let mut i = first as usize;
        while i < input.len() {
            // taps are symmetric, so the reversed window needs no reversal
            let window = &self.buffer[i..i + history + 1];
            out.push(self.taps.iter().zip(window).map(|(h, x)| h * x).sum());
            i += self.factor;
        }
        self.consumed += input.len() as u64;
        let keep_from = self.buffer.len() - history;
        self.buffer.drain(..keep_from);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::Unit;
    use approx::assert_relative_eq;

    fn tone(freq: f64, fs: f64, n: usize) -> SignalBuffer {
        let s = (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).sin()).collect();
        SignalBuffer::new(s, fs).unwrap()
    }

    /// Independent oracle: least-squares amplitude of a sinusoid at `freq`.
    fn amplitude(x: &[f64], freq: f64, fs: f64) -> f64 {
        let (mut c, mut s) = (0.0, 0.0);
        for (i, v) in x.iter().enumerate() {
            let ph = 2.0 * PI * freq * i as f64 / fs;
            c += v * ph.cos();
            s += v * ph.sin();
        }
        2.0 * (c * c + s * s).sqrt() / x.len() as f64
    }

    fn default_filter() -> FirFilter {
        design_lowpass_fir(200, 8000.0, 80_000.0).unwrap()
    }

    #[test]
    fn design_invariants() {
        let f = default_filter();
        assert_eq!(f.coefficients().len(), 201);
        let h = f.coefficients();
        for n in 0..=200 {
            assert_eq!(h[n], h[200 - n]);
        }
        assert!((h.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn design_response_points() {
        let f = default_filter();
        let dc = f.magnitude(0.0);
        assert_relative_eq!(dc, 1.0, epsilon = 1e-9);
        let pass = f.magnitude(4000.0);
        assert!((0.99..=1.01).contains(&pass), "{pass}");
        assert!(f.magnitude(12_000.0) <= 1e-2 * dc);
        // -6 dB point within 2 % of the cutoff
        let half = (7840..=8160).map(|f0| f0 as f64).find(|&fr| f.magnitude(fr) <= 0.5);
        assert!(half.is_some());
        for fr in (10_000..40_000).step_by(50) {
            let db = 20.0 * f.magnitude(fr as f64).log10();
            assert!(db <= -50.0, "{fr} Hz: {db} dB");
        }
    }

    #[test]
    fn rejects_bad_designs() {
        assert!(design_lowpass_fir(200, 40_000.0, 80_000.0).is_err());
        assert!(design_lowpass_fir(201, 8000.0, 80_000.0).is_err());
        assert!(design_lowpass_fir(200, 0.0, 80_000.0).is_err());
    }

    #[test]
    fn impulse_returns_taps() {
        let f = design_lowpass_fir(20, 1000.0, 8000.0).unwrap();
        let mut x = vec![0.0; 64];
        x[30] = 1.0;
        let y = apply_fir(&SignalBuffer::new(x, 8000.0).unwrap(), &f).unwrap();
        assert_eq!(&y.samples()[20..=40], f.coefficients());
        assert_eq!(y.len(), 64);
    }

    #[test]
    fn tones_through_filter() {
        let f = default_filter();
        let n = 80_000;
        let low = apply_fir(&tone(50.0, 80_000.0, n), &f).unwrap();
        let a = amplitude(&low.samples()[100..n - 100], 50.0, 80_000.0);
        // Hamming passband ripple is about 0.02 dB
        assert!((a - 1.0).abs() < 5e-3, "{a}");
        let high = apply_fir(&tone(20_000.0, 80_000.0, 8000), &f).unwrap();
        assert!(amplitude(&high.samples()[100..7900], 20_000.0, 80_000.0) <= 0.01);
        assert!(apply_fir(&tone(50.0, 40_000.0, 100), &f).is_err());
    }

    #[test]
    fn decimation_contracts() {
        let buf = tone(10.0, 80_000.0, 8000);
        assert_eq!(decimate(&buf, 1).unwrap(), buf);
        let d = decimate(&buf, 4).unwrap();
        assert_eq!(d.sample_rate(), 20_000.0);
        assert_eq!(d.len(), 2000);
        let filtered = apply_fir(&buf, &default_filter()).unwrap();
        assert!(decimate(&filtered, 4).is_ok());
        assert!(decimate(&filtered, 5).is_err());
        assert!(decimate(&buf, 0).is_err());
    }

    #[test]
    fn chain_preserves_1khz() {
        let f = default_filter();
        let y = decimate(&apply_fir(&tone(1000.0, 80_000.0, 80_000), &f).unwrap(), 4).unwrap();
        let a = amplitude(&y.samples()[100..19_900], 1000.0, 20_000.0);
        assert!((a - 1.0).abs() < 5e-3, "{a}");
    }

    #[test]
    fn chain_blocks_alias_of_19khz() {
        let f = default_filter();
        let y = decimate(&apply_fir(&tone(19_000.0, 80_000.0, 80_000), &f).unwrap(), 4).unwrap();
        // 19 kHz folds to 1 kHz at 20 kHz
        let a = amplitude(&y.samples()[100..19_900], 1000.0, 20_000.0);
        assert!(20.0 * a.log10() < -60.0, "{a}");
    }

    #[test]
    fn white_noise_stopband_energy() {
        // deterministic LCG noise keeps this independent of the rand crate
        let mut state = 0x1234_5678u64;
        let x: Vec<f64> = (0..1 << 15)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        let f = default_filter();
        let y = apply_fir(&SignalBuffer::new(x, 80_000.0).unwrap(), &f).unwrap();
        let y = &y.samples()[200..(1 << 15) - 200];
        // direct DFT energy split at 10 kHz on a decimated bin grid
        let n = y.len();
        let (mut total, mut stop) = (0.0, 0.0);
        for k in (0..n / 2).step_by(7) {
            let w = 2.0 * PI * k as f64 / n as f64;
            let (re, im) = y.iter().enumerate().fold((0.0, 0.0), |(re, im), (i, v)| {
                (re + v * (w * i as f64).cos(), im - v * (w * i as f64).sin())
            });
            let p = re * re + im * im;
            total += p;
            if k as f64 * 80_000.0 / n as f64 > 10_000.0 {
                stop += p;
            }
        }
        assert!(stop / total <= 1e-4, "{}", stop / total);
    }

    #[test]
    fn streaming_decimator_matches_buffer_path() {
        let f = design_lowpass_fir(40, 2000.0, 16_000.0).unwrap();
        let x: Vec<f64> = (0..3000).map(|i| ((i * 37) % 101) as f64 - 50.0).collect();
        let buf = SignalBuffer::with_unit(x.clone(), 16_000.0, Unit::Volts).unwrap();
        let reference = apply_fir(&buf, &f).unwrap();
        let mut dec = FirDecimator::new(&f, 4).unwrap();
        let mut out = Vec::new();
        for chunk in x.chunks(333) {
            dec.process(chunk, &mut out);
        }
        assert_eq!(out.len(), 750);
        // output m corresponds to compensated index 4m - 20
        for m in 10..740 {
            let r = reference.samples()[4 * m - 20];
            assert!((out[m] - r).abs() < 1e-9, "{m}: {} vs {r}", out[m]);
        }
    }

    #[test]
    fn taps_csv_has_header_and_rows() {
        let mut out = Vec::new();
        default_filter().write_taps_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("index,coefficient\n"));
        assert_eq!(text.lines().count(), 202);
    }

    #[test]
    fn chain_config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        assert_eq!(ChainConfig::default().output_rate(), 20_000.0);
        let bad = ChainConfig { decimation: 5, ..ChainConfig::default() };
        assert!(bad.validate().is_err());
    }
}
