//! Time-domain statistics of one vibration acquisition.

use crate::stats;

use super::FeatureError;

pub const TIME_DOMAIN_NAMES: [&str; 10] = [
    "vib_rms",
    "vib_mad",
    "vib_peak_to_peak",
    "vib_skewness",
    "vib_kurtosis",
    "vib_crest_factor",
    "vib_clearance_factor",
    "vib_shape_factor",
    "vib_margin_factor",
    "vib_max_amplitude",
];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimeDomainFeatures {
    pub rms: f64,
    /// Median absolute deviation from the median.
    pub mad: f64,
    pub peak_to_peak: f64,
    pub skewness: f64,
    /// Non-excess kurtosis.
    pub kurtosis: f64,
    pub crest_factor: f64,
    pub clearance_factor: f64,
    pub shape_factor: f64,
    pub margin_factor: f64,
    /// Peak value `max |x|`.
    pub max_amplitude: f64,
}

impl TimeDomainFeatures {
    /// Values in [`TIME_DOMAIN_NAMES`] order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.rms,
            self.mad,
            self.peak_to_peak,
            self.skewness,
            self.kurtosis,
            self.crest_factor,
            self.clearance_factor,
            self.shape_factor,
            self.margin_factor,
            self.max_amplitude,
        ]
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Computes the ten time-domain statistics. Ratio features are 0 when their
/// denominator vanishes (e.g. an all-zero window).
pub fn time_domain_features(window: &[f64]) -> Result<TimeDomainFeatures, FeatureError> {
    if window.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let n = window.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_abs = 0.0;
    let mut sum_sqrt_abs = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &x in window {
        let a = x.abs();
        sum_sq += x * x;
        sum_abs += a;
        sum_sqrt_abs += libm::sqrt(a);
        max = max.max(x);
        min = min.min(x);
    }
    let rms = libm::sqrt(sum_sq / n);
    let mean_abs = sum_abs / n;
    let mean_sqrt_abs = sum_sqrt_abs / n;
    let peak = max.abs().max(min.abs());

    Ok(TimeDomainFeatures {
        rms,
        mad: stats::median_abs_deviation(window),
        peak_to_peak: max - min,
        skewness: stats::skewness(window),
        kurtosis: stats::kurtosis(window),
        // peak / RMS
        crest_factor: ratio(peak, rms),
        // peak / (mean sqrt|x|)^2
        clearance_factor: ratio(peak, mean_sqrt_abs * mean_sqrt_abs),
        // RMS / mean |x|
        shape_factor: ratio(rms, mean_abs),
        // peak / (mean |x|)^2
        margin_factor: ratio(peak, mean_abs * mean_abs),
        max_amplitude: peak,
    })
}
