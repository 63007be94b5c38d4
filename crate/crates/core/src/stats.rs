//! Descriptive statistics shared by feature extraction, selection and tuning.
//!
//! All moment estimators are population (biased) estimators. Degenerate
//! inputs (empty slices, zero variance) return 0 rather than NaN so that
//! downstream feature matrices stay finite.

use alloc::vec::Vec;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variance.
pub fn variance(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

pub fn std_dev(x: &[f64]) -> f64 {
    libm::sqrt(variance(x))
}

/// Central moments 2, 3 and 4 in a single pass over the centred data.
fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let n = x.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// Population skewness `m3 / m2^1.5`; 0 for constant input.
pub fn skewness(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (m2, m3, _) = central_moments(x);
    if m2 <= f64::EPSILON * f64::EPSILON {
        return 0.0;
    }
    m3 / (m2 * libm::sqrt(m2))
}

/// Population kurtosis `m4 / m2^2` (not excess; a Gaussian gives 3).
pub fn kurtosis(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let (m2, _, m4) = central_moments(x);
    if m2 <= f64::EPSILON * f64::EPSILON {
        return 0.0;
    }
    m4 / (m2 * m2)
}

/// Median of an already sorted slice.
fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    sorted_median(&v)
}

/// Median absolute deviation from the median (unscaled).
pub fn median_abs_deviation(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let med = sorted_median(&v);
    for e in v.iter_mut() {
        *e = (*e - med).abs();
    }
    v.sort_unstable_by(f64::total_cmp);
    sorted_median(&v)
}

/// Pearson correlation; 0 when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let (a, b) = (&a[..n], &b[..n]);
    let ma = mean(a);
    let mb = mean(b);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let denom = libm::sqrt(saa * sbb);
    if denom <= 0.0 || !denom.is_finite() {
        return 0.0;
    }
    (sab / denom).clamp(-1.0, 1.0)
}

/// Quantiles at the given probabilities using linear interpolation between
/// order statistics (the "type 7" rule). Input need not be sorted.
pub fn quantiles(x: &[f64], probs: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let last = (v.len() - 1) as f64;
    probs
        .iter()
        .map(|&p| {
            let h = p.clamp(0.0, 1.0) * last;
            let lo = libm::floor(h) as usize;
            let hi = libm::ceil(h) as usize;
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        })
        .collect()
}

/// Trailing moving average over `min(window, samples so far)` points.
pub fn trailing_mean(x: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    (0..x.len())
        .map(|t| {
            let lo = (t + 1).saturating_sub(window);
            let s = &x[lo..=t];
            s.iter().sum::<f64>() / s.len() as f64
        })
        .collect()
}
