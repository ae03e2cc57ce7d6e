//! Built-in self checks: carrier THD, weighting-filter response, stability,
//! classifier identity, calibration and the standard's compliance points.

use std::fmt;

use serde::Serialize;

use crate::error::Result;
use crate::flicker::classifier::{classify, K_P0_1, K_P10S, K_P1S, K_P3S, K_P50S};
use crate::flicker::compliance::{
    rectangular_pst_with, sinusoidal_max_pinst_with, COMPLIANCE_TOLERANCE, RECTANGULAR_PST_UNITY,
    SINUSOIDAL_PINST_UNITY,
};
use crate::flicker::blocks::{BUTTERWORTH_HZ, BUTTERWORTH_ORDER, HIGHPASS_HZ, PEAK_SENSITIVITY_HZ};
use crate::flicker::{WeightingCascade, WeightingConstants};
use crate::signal::{synthesize_carrier, thd, CarrierSpec, DEFAULT_SYNTHESIS_RATE, DEFAULT_THD_HARMONICS};

/// `(m_c, expected THD %, tolerance in percentage points)`.
pub const THD_TARGETS: [(f64, f64, f64); 3] = [(1.0, 0.0, 1e-9), (0.8, 8.0, 1.0), (0.1, 43.0, 2.0)];
pub const PEAK_TOLERANCE_HZ: f64 = 0.3;
/// Required suppression of the 100 Hz demodulation ripple relative to the peak.
pub const RIPPLE_REJECTION_DB: f64 = 40.0;
/// Digital weighting response against the analog reference, relative.
pub const RESPONSE_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub checks: Vec<Check>,
}

impl ConformanceReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{} {:<34} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConformanceOptions {
    /// Constants the meter under test is built with.
    pub weighting: WeightingConstants,
    pub input_rate: f64,
    /// Include the compliance rows (several seconds of simulation).
    pub compliance: bool,
}

impl Default for ConformanceOptions {
    fn default() -> Self {
        Self {
            weighting: WeightingConstants::LAMP_230V_50HZ,
            input_rate: 20_000.0,
            compliance: true,
        }
    }
}

fn push(checks: &mut Vec<Check>, name: impl Into<String>, passed: bool, detail: String) {
    checks.push(Check {
        name: name.into(),
        passed,
        detail,
    });
}

/// Frequency of maximum gain of the digital cascade, golden-section refined
/// after a coarse scan of 1 to 30 Hz.
pub fn weighting_peak(cascade: &WeightingCascade, fs: f64) -> f64 {
    let gain = |f: f64| cascade.magnitude(f, fs);
    let coarse = (0..=290).map(|i| 1.0 + 0.1 * i as f64).fold((1.0, 0.0), |best, f| {
        let g = gain(f);
        if g > best.1 {
            (f, g)
        } else {
            best
        }
    });
    let (mut a, mut b) = (coarse.0 - 0.1, coarse.0 + 0.1);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let (c, d) = (b - r * (b - a), a + r * (b - a));
        if gain(c) > gain(d) {
            b = d;
        } else {
            a = c;
        }
    }
    0.5 * (a + b)
}

pub fn validate(options: &ConformanceOptions) -> Result<ConformanceReport> {
    let mut checks = Vec::new();
    let fs = options.input_rate;

    for (m_c, target, tol) in THD_TARGETS {
        let carrier = synthesize_carrier(&CarrierSpec::lv(m_c)?, DEFAULT_SYNTHESIS_RATE, 0.02)?;
        let value = thd(&carrier, 50.0, DEFAULT_THD_HARMONICS)? * 100.0;
        push(
            &mut checks,
            format!("thd m_c={m_c}"),
            (value - target).abs() <= tol,
            format!("{value:.3}% (target {target} ± {tol})"),
        );
    }

    let cascade = WeightingCascade::new(fs, &options.weighting)?;
    let pole = cascade.max_pole_magnitude();
    push(&mut checks, "filter stability", pole < 1.0, format!("max pole magnitude {pole:.9}"));

    let peak = weighting_peak(&cascade, fs);
    push(
        &mut checks,
        "weighting peak frequency",
        (peak - PEAK_SENSITIVITY_HZ).abs() <= PEAK_TOLERANCE_HZ,
        format!("{peak:.3} Hz (target {PEAK_SENSITIVITY_HZ} ± {PEAK_TOLERANCE_HZ})"),
    );

    let ripple_db = 20.0 * (cascade.magnitude(PEAK_SENSITIVITY_HZ, fs) / cascade.magnitude(100.0, fs)).log10();
    push(
        &mut checks,
        "100 Hz rejection",
        ripple_db >= RIPPLE_REJECTION_DB,
        format!("{ripple_db:.1} dB below 8.8 Hz (need {RIPPLE_REJECTION_DB})"),
    );

    // the reference is always the published lamp, whatever the meter was built from
    let reference = WeightingConstants::LAMP_230V_50HZ;
    let worst = [0.5, 1.0, 2.0, 5.0, 8.8, 10.0, 15.0, 20.0, 25.0]
        .iter()
        .map(|&f| {
            let highpass = f / f64::hypot(f, HIGHPASS_HZ);
            let butterworth = 1.0 / (1.0 + (f / BUTTERWORTH_HZ).powi(2 * BUTTERWORTH_ORDER as i32)).sqrt();
            let analog = highpass * butterworth * reference.analog_magnitude(f);
            (cascade.magnitude(f, fs) / analog - 1.0).abs()
        })
        .fold(0.0, f64::max);
    push(
        &mut checks,
        "weighting response vs reference",
        worst <= RESPONSE_TOLERANCE,
        format!("worst relative deviation {:.3}% (limit {}%)", worst * 100.0, RESPONSE_TOLERANCE * 100.0),
    );

    let k_sum = K_P0_1 + K_P1S + K_P3S + K_P10S + K_P50S;
    let constant = classify(&vec![1.0; 5000])?.pst;
    push(
        &mut checks,
        "classifier constant input",
        (constant - k_sum.sqrt()).abs() < 1e-12,
        format!("Pst {constant:.9} for P_inst = 1 (coefficient sum {k_sum})"),
    );

    let threshold = sinusoidal_max_pinst_with(&options.weighting, PEAK_SENSITIVITY_HZ, 0.25, fs)?;
    push(
        &mut checks,
        "calibration at threshold",
        (threshold - 1.0).abs() <= 0.01,
        format!("max P_inst {threshold:.4} for 8.8 Hz, 0.25 %"),
    );

    if options.compliance {
        for &(f, depth) in SINUSOIDAL_PINST_UNITY {
            let p = sinusoidal_max_pinst_with(&options.weighting, f, depth, fs)?;
            push(
                &mut checks,
                format!("sinusoidal {f} Hz, {depth} %"),
                (p - 1.0).abs() <= COMPLIANCE_TOLERANCE,
                format!("max P_inst {p:.4}"),
            );
        }
        for &(cpm, depth) in RECTANGULAR_PST_UNITY {
            let p = rectangular_pst_with(&options.weighting, cpm, depth, fs)?.pst;
            push(
                &mut checks,
                format!("rectangular {cpm} cpm, {depth} %"),
                (p - 1.0).abs() <= COMPLIANCE_TOLERANCE,
                format!("Pst {p:.4}"),
            );
        }
    }

    Ok(ConformanceReport { checks })
}
