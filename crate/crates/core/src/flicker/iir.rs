//! Second-order sections discretized from analog prototypes.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Direct-form-II-transposed biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    s1: f64,
    s2: f64,
}

impl Biquad {
    pub fn new(b: [f64; 3], a: [f64; 2]) -> Self {
        Self { b, a, s1: 0.0, s2: 0.0 }
    }

    /// Bilinear transform of `(b0 s² + b1 s + b2) / (a0 s² + a1 s + a2)`,
    /// prewarped so the analog and digital responses agree at `match_hz`.
    pub fn from_analog(b: [f64; 3], a: [f64; 3], sample_rate: f64, match_hz: f64) -> Self {
        let w = 2.0 * PI * match_hz;
        let c = w / (w / (2.0 * sample_rate)).tan();
        if a[0] == 0.0 && b[0] == 0.0 {
            // first order: avoid the cancelling pole/zero pair at z = -1
            let n0 = b[1] * c + b[2];
            let n1 = b[2] - b[1] * c;
            let d0 = a[1] * c + a[2];
            let d1 = a[2] - a[1] * c;
            return Self::new([n0 / d0, n1 / d0, 0.0], [d1 / d0, 0.0]);
        }
        let c2 = c * c;
        let nb = [
            b[0] * c2 + b[1] * c + b[2],
            2.0 * (b[2] - b[0] * c2),
            b[0] * c2 - b[1] * c + b[2],
        ];
        let na = [
            a[0] * c2 + a[1] * c + a[2],
            2.0 * (a[2] - a[0] * c2),
            a[0] * c2 - a[1] * c + a[2],
        ];
        Self::new(
            [nb[0] / na[0], nb[1] / na[0], nb[2] / na[0]],
            [na[1] / na[0], na[2] / na[0]],
        )
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.s1;
        self.s1 = self.b[1] * x - self.a[0] * y + self.s2;
        self.s2 = self.b[2] * x - self.a[1] * y;
        y
    }

    pub fn reset(&mut self) {
        self.s1 = 0.0;
        self.s2 = 0.0;
    }

    /// Largest pole magnitude of `z² + a1 z + a2`.
    pub fn max_pole_magnitude(&self) -> f64 {
        let [a1, a2] = self.a;
        let disc = a1 * a1 - 4.0 * a2;
        if disc >= 0.0 {
            let r = disc.sqrt();
            ((-a1 + r) / 2.0).abs().max(((-a1 - r) / 2.0).abs())
        } else {
            // complex pair: |p|² = a2
            a2.sqrt()
        }
    }

    /// Complex response `H(e^{jω})` at `freq`.
    pub fn response(&self, freq: f64, sample_rate: f64) -> (f64, f64) {
        let w = 2.0 * PI * freq / sample_rate;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, self.b[1] * s1 + self.b[2] * s2);
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.s1.is_finite() && self.s2.is_finite()
    }
}

/// Series connection of biquads.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    name: &'static str,
    sections: Vec<Biquad>,
}

impl Cascade {
    /// Builds the cascade, refusing any section with a pole on or outside the
    /// unit circle.
    pub fn new(name: &'static str, sections: Vec<Biquad>) -> Result<Self> {
        for (i, s) in sections.iter().enumerate() {
            let magnitude = s.max_pole_magnitude();
            if !(magnitude < 1.0) {
                return Err(Error::UnstableFilter {
                    stage: name,
                    section: i,
                    magnitude,
                });
            }
        }
        Ok(Self { name, sections })
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |acc, s| s.process(acc))
    }

    pub fn reset(&mut self) {
        self.sections.iter_mut().for_each(Biquad::reset);
    }

    pub fn magnitude(&self, freq: f64, sample_rate: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(freq, sample_rate);
                (re * re + im * im).sqrt()
            })
            .product()
    }

    pub fn max_pole_magnitude(&self) -> f64 {
        self.sections
            .iter()
            .map(Biquad::max_pole_magnitude)
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.sections.iter().all(Biquad::is_finite)
    }
}

/// Analog Butterworth low-pass of even `order` as second-order sections.
pub fn butterworth_lowpass(order: usize, cutoff_hz: f64, sample_rate: f64) -> Vec<Biquad> {
    assert!(order % 2 == 0 && order > 0, "even order required");
    let wc = 2.0 * PI * cutoff_hz;
    (1..=order / 2)
        .map(|k| {
            let theta = PI * (2 * k - 1) as f64 / (2 * order) as f64;
            let a1 = 2.0 * wc * theta.sin();
            Biquad::from_analog([0.0, 0.0, wc * wc], [1.0, a1, wc * wc], sample_rate, cutoff_hz)
        })
        .collect()
}

/// First-order analog high-pass `s / (s + ωc)`.
pub fn first_order_highpass(cutoff_hz: f64, sample_rate: f64) -> Biquad {
    let wc = 2.0 * PI * cutoff_hz;
    Biquad::from_analog([0.0, 1.0, 0.0], [0.0, 1.0, wc], sample_rate, cutoff_hz)
}

/// First-order analog low-pass `1 / (1 + sτ)`.
pub fn first_order_lowpass(time_constant: f64, sample_rate: f64) -> Biquad {
    let corner = 1.0 / (2.0 * PI * time_constant);
    Biquad::from_analog([0.0, 0.0, 1.0], [0.0, time_constant, 1.0], sample_rate, corner)
}
