//! Block 5: statistical classification of P_inst into Pst.
//!
//! Percentiles are exact order statistics of the stored P_inst samples.
//! `P_k` is the smallest stored level that is exceeded by at most `k` % of
//! the samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pst below this level is flagged: hardware and software meters stop
/// agreeing in this range.
pub const PST_FLOOR: f64 = 0.05;

pub const K_P0_1: f64 = 0.0314;
pub const K_P1S: f64 = 0.0525;
pub const K_P3S: f64 = 0.0657;
pub const K_P10S: f64 = 0.28;
pub const K_P50S: f64 = 0.08;

/// Smoothed percentiles entering the Pst formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p0_1: f64,
    pub p1s: f64,
    pub p3s: f64,
    pub p10s: f64,
    pub p50s: f64,
}

impl Percentiles {
    pub fn pst(&self) -> f64 {
        (K_P0_1 * self.p0_1 + K_P1S * self.p1s + K_P3S * self.p3s + K_P10S * self.p10s + K_P50S * self.p50s)
            .max(0.0)
            .sqrt()
    }

    /// Builds the smoothed set from any percentile lookup `level(k)`.
    pub fn from_lookup(level: impl Fn(f64) -> f64) -> Self {
        let mean = |ks: &[f64]| ks.iter().map(|&k| level(k)).sum::<f64>() / ks.len() as f64;
        Self {
            p0_1: level(0.1),
            p1s: mean(&[0.7, 1.0, 1.5]),
            p3s: mean(&[2.2, 3.0, 4.0]),
            p10s: mean(&[6.0, 8.0, 10.0, 13.0, 17.0]),
            p50s: mean(&[30.0, 50.0, 80.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PstReading {
    pub pst: f64,
    pub below_floor: bool,
    pub percentiles: Percentiles,
}

impl PstReading {
    pub fn from_percentiles(percentiles: Percentiles) -> Self {
        let pst = percentiles.pst();
        Self {
            pst,
            below_floor: pst < PST_FLOOR,
            percentiles,
        }
    }
}

/// Level exceeded by at most `k` % of the ascending-sorted samples.
pub fn exceedance_level(sorted: &[f64], k: f64) -> f64 {
    let n = sorted.len();
    let allowed = ((k / 100.0) * n as f64).floor() as usize;
    sorted[n - 1 - allowed.min(n - 1)]
}

/// Pst from exactly `samples` (callers select the window).
pub fn classify(samples: &[f64]) -> Result<PstReading> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, available: 0 });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(PstReading::from_percentiles(Percentiles::from_lookup(|k| {
        exceedance_level(&sorted, k)
    })))
}

/// Pst over the first `window_samples` of `p_inst`.
pub fn block5_classify(p_inst: &[f64], window_samples: usize) -> Result<PstReading> {
    if window_samples == 0 || p_inst.len() < window_samples {
        return Err(Error::InsufficientSamples {
            needed: window_samples.max(1),
            available: p_inst.len(),
        });
    }
    classify(&p_inst[..window_samples])
}

/// Pst from a logarithmically binned cumulative probability function, the
/// classifier layout of hardware meters. Bins span six decades below the
/// largest sample; levels are interpolated linearly inside a bin.
pub fn pst_from_log_cpf(samples: &[f64], bins: usize) -> Result<f64> {
    if samples.is_empty() || bins == 0 {
        return Err(Error::InsufficientSamples { needed: 1, available: samples.len() });
    }
    let top = samples.iter().cloned().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(0.0);
    }
    let lo = top * 1e-6;
    let ratio = (top / lo).ln() / bins as f64;
    let edge = |i: usize| lo * (ratio * i as f64).exp();
    let mut counts = vec![0usize; bins];
    let mut below = 0usize;
    for &s in samples {
        if s < lo {
            below += 1;
        } else {
            let i = (((s / lo).ln() / ratio) as usize).min(bins - 1);
            counts[i] += 1;
        }
    }
    let n = samples.len() as f64;
    // exceed[i] = fraction of samples at or above edge(i)
    let mut exceed = vec![0.0; bins + 1];
    let mut acc = 0usize;
    for i in (0..bins).rev() {
        acc += counts[i];
        exceed[i] = acc as f64 / n;
    }
    let total_above = (n - below as f64) / n;
    let level = |k: f64| -> f64 {
        let target = k / 100.0;
        if target >= total_above {
            return lo;
        }
        // first bin whose upper edge is exceeded by no more than the target
        let i = (0..bins).find(|&i| exceed[i + 1] <= target).unwrap_or(bins - 1);
        let (p_lo, p_hi) = (exceed[i], exceed[i + 1]);
        let frac = if p_lo > p_hi { (p_lo - target) / (p_lo - p_hi) } else { 1.0 };
        edge(i) + frac * (edge(i + 1) - edge(i))
    };
    Ok(Percentiles::from_lookup(level).pst())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force oracle: scan every distinct sample value and keep the
    /// smallest one exceeded by at most k % of samples.
    fn brute_level(samples: &[f64], k: f64) -> f64 {
        let n = samples.len() as f64;
        samples
            .iter()
            .copied()
            .filter(|&x| samples.iter().filter(|&&s| s > x).count() as f64 <= (k / 100.0 * n).floor())
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn constant_inputs() {
        let coeff_sum = K_P0_1 + K_P1S + K_P3S + K_P10S + K_P50S;
        assert!((coeff_sum - 0.5096).abs() < 1e-12);
        let one = classify(&vec![1.0; 1000]).unwrap();
        assert!((one.pst - coeff_sum.sqrt()).abs() < 1e-12);
        assert_eq!(classify(&vec![0.0; 1000]).unwrap().pst, 0.0);
        assert!(classify(&vec![0.0; 10]).unwrap().below_floor);
        let four = classify(&vec![4.0; 1000]).unwrap();
        assert!((four.pst - 2.0 * coeff_sum.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn insufficient_samples() {
        assert!(block5_classify(&[1.0; 10], 11).is_err());
        assert!(block5_classify(&[], 0).is_err());
        assert!(block5_classify(&[1.0; 10], 10).is_ok());
    }

    #[test]
    fn known_order_statistics() {
        let samples: Vec<f64> = (1..=1000).map(f64::from).collect();
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        // 1 sample exceeds 999; 10 exceed 990; 500 exceed 500
        assert_eq!(exceedance_level(&sorted, 0.1), 999.0);
        assert_eq!(exceedance_level(&sorted, 1.0), 990.0);
        assert_eq!(exceedance_level(&sorted, 50.0), 500.0);
    }

    proptest! {
        #[test]
        fn percentiles_match_brute_force(samples in proptest::collection::vec(0.0f64..10.0, 1..300)) {
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            for k in [0.1, 0.7, 1.0, 1.5, 2.2, 3.0, 4.0, 6.0, 8.0, 10.0, 13.0, 17.0, 30.0, 50.0, 80.0] {
                prop_assert_eq!(exceedance_level(&sorted, k), brute_level(&samples, k));
            }
        }

        #[test]
        fn pst_homogeneity(samples in proptest::collection::vec(0.0f64..10.0, 10..300), c in 0.01f64..100.0) {
            let base = classify(&samples).unwrap().pst;
            let scaled: Vec<f64> = samples.iter().map(|s| s * c).collect();
            let pst = classify(&scaled).unwrap().pst;
            prop_assert!((pst - c.sqrt() * base).abs() <= 1e-12 * (1.0 + pst));
        }
    }

    #[test]
    fn log_cpf_agrees_with_exact_classifier() {
        // smooth, spread-out P_inst trace
        let samples: Vec<f64> = (0..300_000)
            .map(|i| {
                let t = i as f64 / 500.0;
                0.2 + 1.5 * (t * 0.37).sin().powi(2) + 0.8 * (t * 2.9).cos().abs().powi(6)
            })
            .collect();
        let exact = classify(&samples).unwrap().pst;
        let binned = pst_from_log_cpf(&samples, 10_000).unwrap();
        assert!((binned / exact - 1.0).abs() < 0.005, "{binned} vs {exact}");
    }
}
