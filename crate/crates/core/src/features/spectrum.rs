//! Hann-windowed amplitude spectrum via an in-place radix-2 FFT.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

/// In-place iterative radix-2 decimation-in-time FFT.
///
/// `re.len()` must equal `im.len()` and be a power of two.
pub fn fft_in_place(re: &mut [f64], im: &mut [f64]) {
    let n = re.len();
    assert_eq!(n, im.len());
    assert!(n.is_power_of_two(), "fft length {n} is not a power of two");
    if n <= 1 {
        return;
    }

    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }

    // twiddles for the largest stage; smaller stages stride through it
    let half = n / 2;
    let (tw_re, tw_im): (Vec<f64>, Vec<f64>) = (0..half)
        .map(|k| {
            let a = -2.0 * PI * k as f64 / n as f64;
            (libm::cos(a), libm::sin(a))
        })
        .unzip();

    let mut len = 2;
    while len <= n {
        let step = n / len;
        let h = len / 2;
        for start in (0..n).step_by(len) {
            for k in 0..h {
                let (wr, wi) = (tw_re[k * step], tw_im[k * step]);
                let a = start + k;
                let b = a + h;
                let xr = re[b] * wr - im[b] * wi;
                let xi = re[b] * wi + im[b] * wr;
                re[b] = re[a] - xr;
                im[b] = im[a] - xi;
                re[a] += xr;
                im[a] += xi;
            }
        }
        len <<= 1;
    }
}

/// Single-sided amplitude spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Frequency spacing between bins in Hz.
    pub bin_hz: f64,
    /// Amplitude per bin, `0..=nfft/2`, scaled so that a sinusoid of
    /// amplitude `A` on a bin centre shows a peak of `A`.
    pub amplitudes: Vec<f64>,
}

impl Spectrum {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Largest amplitude among bins within `tolerance_hz` of `freq_hz`;
    /// 0 if no bin falls in that range.
    pub fn peak_near(&self, freq_hz: f64, tolerance_hz: f64) -> f64 {
        let lo = freq_hz - tolerance_hz;
        let hi = freq_hz + tolerance_hz;
        let first = libm::ceil((lo / self.bin_hz).max(0.0)) as usize;
        let mut best = 0.0f64;
        let mut k = first;
        while k < self.amplitudes.len() && self.frequency(k) <= hi {
            best = best.max(self.amplitudes[k]);
            k += 1;
        }
        best
    }

    /// Sum of squared amplitudes over bins with frequency in `[lo, hi)`.
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let first = libm::ceil((lo_hz / self.bin_hz).max(0.0)) as usize;
        let mut total = 0.0;
        let mut k = first;
        while k < self.amplitudes.len() && self.frequency(k) < hi_hz {
            total += self.amplitudes[k] * self.amplitudes[k];
            k += 1;
        }
        total
    }
}

/// Symmetric Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - libm::cos(2.0 * PI * i as f64 / denom)))
        .collect()
}

/// Hann-windowed spectrum, zero-padded to the next power of two.
pub fn amplitude_spectrum(window: &[f64], sample_rate_hz: f64) -> Spectrum {
    let n = window.len();
    let nfft = n.next_power_of_two();
    let w = hann(n);
    let gain: f64 = w.iter().sum();
    let mut re = vec![0.0; nfft];
    let mut im = vec![0.0; nfft];
    for i in 0..n {
        re[i] = window[i] * w[i];
    }
    fft_in_place(&mut re, &mut im);
    let amplitudes = (0..=nfft / 2)
        .map(|k| {
            let mag = libm::sqrt(re[k] * re[k] + im[k] * im[k]);
            let scale = if k == 0 || k == nfft / 2 { 1.0 } else { 2.0 };
            if gain > 0.0 {
                scale * mag / gain
            } else {
                0.0
            }
        })
        .collect();
    Spectrum {
        bin_hz: sample_rate_hz / nfft as f64,
        amplitudes,
    }
}
