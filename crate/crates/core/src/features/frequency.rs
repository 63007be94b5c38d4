//! Shaft harmonics, 20 Hz band powers and bearing defect frequencies.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::spectrum::{amplitude_spectrum, Spectrum};
use super::FeatureError;

/// Half-width of the band searched for the amplitude at a target frequency.
pub const AMPLITUDE_TOLERANCE_HZ: f64 = 10.0;
pub const BAND_WIDTH_HZ: f64 = 20.0;
pub const BAND_LIMIT_HZ: f64 = 1000.0;
pub const BAND_COUNT: usize = 50;
pub const MIN_SAMPLE_RATE_HZ: f64 = 2000.0;
pub const MIN_WINDOW_S: f64 = 1.0;

/// Rolling-element bearing geometry and shaft speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BearingGeometry {
    pub n_balls: u32,
    pub pitch_diameter: f64,
    pub ball_diameter: f64,
    /// Contact angle in radians.
    pub contact_angle: f64,
    pub shaft_hz: f64,
}

impl Default for BearingGeometry {
    /// Eight balls, `D_b/D_p = 0.3`, zero contact angle, 7500 RPM shaft.
    fn default() -> Self {
        BearingGeometry {
            n_balls: 8,
            pitch_diameter: 1.0,
            ball_diameter: 0.3,
            contact_angle: 0.0,
            shaft_hz: 125.0,
        }
    }
}

impl BearingGeometry {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |m: &str| Err(FeatureError::InvalidGeometry(String::from(m)));
        if self.n_balls == 0 {
            return bad("n_balls must be positive");
        }
        if !(self.ball_diameter > 0.0 && self.ball_diameter < self.pitch_diameter) {
            return bad("ball diameter must be positive and below the pitch diameter");
        }
        if !(self.contact_angle >= 0.0 && self.contact_angle < FRAC_PI_2) {
            return bad("contact angle must lie in [0, pi/2)");
        }
        if !(self.shaft_hz > 0.0 && self.shaft_hz.is_finite()) {
            return bad("shaft frequency must be positive");
        }
        Ok(())
    }
}

/// Characteristic defect frequencies in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BearingFrequencies {
    /// Ball pass frequency, outer race.
    pub bpfo: f64,
    /// Ball pass frequency, inner race.
    pub bpfi: f64,
    /// Ball spin frequency.
    pub bsf: f64,
    /// Fundamental train (cage) frequency.
    pub ftf: f64,
}

impl BearingFrequencies {
    pub fn as_array(&self) -> [f64; 4] {
        [self.bpfo, self.bpfi, self.bsf, self.ftf]
    }
}

pub fn bearing_frequencies(geom: &BearingGeometry) -> Result<BearingFrequencies, FeatureError> {
    geom.validate()?;
    let n = geom.n_balls as f64;
    let f = geom.shaft_hz;
    let r = geom.ball_diameter / geom.pitch_diameter * libm::cos(geom.contact_angle);
    Ok(BearingFrequencies {
        bpfo: n * f / 2.0 * (1.0 - r),
        bpfi: n * f / 2.0 * (1.0 + r),
        bsf: geom.pitch_diameter * f / (2.0 * geom.ball_diameter) * (1.0 - r * r),
        ftf: f / 2.0 * (1.0 - r),
    })
}

const BEARING_PREFIXES: [&str; 4] = ["bpfo", "bpfi", "bsf", "ftf"];

/// Column names of [`SpectralFeatures::values`], in order.
pub fn frequency_domain_names() -> Vec<String> {
    let mut names = Vec::with_capacity(3 + BAND_COUNT + 12);
    for h in 1..=3 {
        names.push(format!("vib_amp_{h}n"));
    }
    for b in 0..BAND_COUNT {
        let lo = b as f64 * BAND_WIDTH_HZ;
        names.push(format!("vib_band_{:04}_{:04}", lo as u32, (lo + BAND_WIDTH_HZ) as u32));
    }
    for p in BEARING_PREFIXES {
        for h in 1..=3 {
            names.push(format!("vib_{p}_{h}n"));
        }
    }
    names
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFeatures {
    /// Amplitude at 1x, 2x and 3x the shaft frequency.
    pub shaft_harmonics: [f64; 3],
    /// Power of each 20 Hz band in `[0, 1 kHz)`.
    pub band_powers: Vec<f64>,
    /// Amplitude at harmonics 1-3 of BPFO, BPFI, BSF, FTF (row per frequency).
    pub bearing_harmonics: [[f64; 3]; 4],
}

impl SpectralFeatures {
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(3 + self.band_powers.len() + 12);
        v.extend_from_slice(&self.shaft_harmonics);
        v.extend_from_slice(&self.band_powers);
        for row in &self.bearing_harmonics {
            v.extend_from_slice(row);
        }
        v
    }
}

fn check_window(window: &[f64], rate_hz: f64) -> Result<(), FeatureError> {
    if !(rate_hz >= MIN_SAMPLE_RATE_HZ) {
        return Err(FeatureError::RateTooLow(rate_hz));
    }
    let required = libm::ceil(MIN_WINDOW_S * rate_hz) as usize;
    if window.len() < required {
        return Err(FeatureError::WindowTooShort {
            samples: window.len(),
            required,
        });
    }
    Ok(())
}

pub(crate) fn spectral_features_from(
    spectrum: &Spectrum,
    shaft_hz: f64,
    bearing: &BearingFrequencies,
) -> SpectralFeatures {
    let amp = |f: f64| spectrum.peak_near(f, AMPLITUDE_TOLERANCE_HZ);
    let mut shaft_harmonics = [0.0; 3];
    for (h, slot) in shaft_harmonics.iter_mut().enumerate() {
        *slot = amp(shaft_hz * (h + 1) as f64);
    }
    let band_powers = (0..BAND_COUNT)
        .map(|b| {
            let lo = b as f64 * BAND_WIDTH_HZ;
            spectrum.band_power(lo, lo + BAND_WIDTH_HZ)
        })
        .collect();
    let mut bearing_harmonics = [[0.0; 3]; 4];
    for (row, f0) in bearing_harmonics.iter_mut().zip(bearing.as_array()) {
        for (h, slot) in row.iter_mut().enumerate() {
            *slot = amp(f0 * (h + 1) as f64);
        }
    }
    SpectralFeatures {
        shaft_harmonics,
        band_powers,
        bearing_harmonics,
    }
}

/// Frequency-domain features of one acquisition.
pub fn frequency_domain_features(
    window: &[f64],
    rate_hz: f64,
    geom: &BearingGeometry,
) -> Result<SpectralFeatures, FeatureError> {
    check_window(window, rate_hz)?;
    let bearing = bearing_frequencies(geom)?;
    let spectrum = amplitude_spectrum(window, rate_hz);
    Ok(spectral_features_from(&spectrum, geom.shaft_hz, &bearing))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn sine(freq: f64, amp: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * libm::sin(2.0 * PI * freq * i as f64 / rate))
            .collect()
    }

    #[test]
    fn reference_bearing_frequencies() {
        let f = bearing_frequencies(&BearingGeometry::default()).unwrap();
        assert_eq!(f.bpfo, 350.0);
        assert_eq!(f.bpfi, 650.0);
        assert_eq!(f.ftf, 43.75);
        assert!((f.ftf - f.bpfo / 8.0).abs() < 1e-12);
        assert!(f.bpfi > f.bpfo);
        assert!((f.bsf - 125.0 / 0.6 * 0.91).abs() < 1e-9);
    }

    #[test]
    fn sixty_degree_contact_halves_the_ratio_term() {
        let geom = BearingGeometry {
            contact_angle: PI / 3.0,
            ..BearingGeometry::default()
        };
        let f = bearing_frequencies(&geom).unwrap();
        assert!((f.bpfo - 500.0 * (1.0 - 0.15)).abs() < 1e-9);
    }

    #[test]
    fn vanishing_ball_limit() {
        let geom = BearingGeometry {
            ball_diameter: 1e-12,
            ..BearingGeometry::default()
        };
        let f = bearing_frequencies(&geom).unwrap();
        assert!((f.bpfo - 500.0).abs() < 1e-6);
        assert!((f.bpfi - 500.0).abs() < 1e-6);
        assert!((f.ftf - 62.5).abs() < 1e-6);
    }

    #[test]
    fn invalid_geometry() {
        for geom in [
            BearingGeometry { ball_diameter: 1.5, ..Default::default() },
            BearingGeometry { contact_angle: FRAC_PI_2, ..Default::default() },
            BearingGeometry { shaft_hz: 0.0, ..Default::default() },
        ] {
            assert!(matches!(bearing_frequencies(&geom), Err(FeatureError::InvalidGeometry(_))));
        }
    }

    #[test]
    fn shaft_tone_lands_in_one_band() {
        let rate = 10_000.0;
        let x = sine(125.0, 1.5, rate, 10_000);
        let f = frequency_domain_features(&x, rate, &BearingGeometry::default()).unwrap();
        assert!((f.shaft_harmonics[0] - 1.5).abs() < 0.05 * 1.5);
        let total: f64 = f.band_powers.iter().sum();
        let own = f.band_powers[6]; // [120, 140)
        assert!(own / total > 0.999, "own band share {}", own / total);
    }

    #[test]
    fn bpfo_tone_detected() {
        let rate = 10_000.0;
        let x = sine(350.0, 0.8, rate, 10_000);
        let f = frequency_domain_features(&x, rate, &BearingGeometry::default()).unwrap();
        assert!((f.bearing_harmonics[0][0] - 0.8).abs() < 0.04);
        assert!(f.bearing_harmonics[1][0] < 1e-3);
    }

    #[test]
    fn zero_signal() {
        let f = frequency_domain_features(&vec![0.0; 4096], 4096.0, &BearingGeometry::default()).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.0));
        assert_eq!(f.values().len(), frequency_domain_names().len());
    }

    #[test]
    fn rejects_short_or_slow_windows() {
        let g = BearingGeometry::default();
        assert_eq!(
            frequency_domain_features(&[0.0; 100], 1000.0, &g),
            Err(FeatureError::RateTooLow(1000.0))
        );
        assert!(matches!(
            frequency_domain_features(&[0.0; 100], 4096.0, &g),
            Err(FeatureError::WindowTooShort { .. })
        ));
    }
}
