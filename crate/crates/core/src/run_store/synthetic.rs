//! Seeded synthetic run corpus.
//!
//! Healthy behaviour is a per-machine baseline plus Gaussian noise and a daily
//! cycle. Corrective runs additionally degrade: starting `t_d` days before the
//! failure, the informative channels and the bearing outer-race tone ramp up
//! linearly and the broadband vibration noise grows. Noise channels carry a
//! per-run wander of random sign instead of a degradation ramp. Preventive
//! runs never degrade.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AcquisitionWindow, Dataset, DatasetError, Maintenance, Run, SensorChannel, SECONDS_PER_HOUR};
use crate::features::{bearing_frequencies, BearingGeometry};

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Channel name, nominal level and unit scale.
const CHANNELS: [(&str, f64, f64); 4] = [
    ("bearing_temperature", 45.0, 0.8),
    ("torque", 2.0, 0.05),
    ("pyrometer_temperature", 30.0, 1.0),
    ("vacuum_pressure", 5.0, 0.2),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorProfile {
    /// Run length range in days.
    pub run_days: (f64, f64),
    /// Range of the degradation onset, in days before failure.
    pub degradation_days: (f64, f64),
    /// Degradation ramp slope, in units of the channel noise per day.
    pub drift_per_day: f64,
    /// Multiplier on every noise source.
    pub noise_level: f64,
    /// Channels that degrade before a failure.
    pub informative_channels: usize,
    /// Channels that never degrade.
    pub noise_channels: usize,
    /// Spread of per-machine baselines, in channel noise units.
    pub machine_spread: f64,
    pub channel_period_s: f64,
    pub vibration_rate_hz: f64,
    pub vibration_duration_s: f64,
    pub geometry: BearingGeometry,
    /// Start time of the first run, Unix seconds.
    pub epoch_unix_s: i64,
}

impl Default for GeneratorProfile {
    fn default() -> Self {
        GeneratorProfile {
            run_days: (20.0, 32.0),
            degradation_days: (8.0, 12.0),
            drift_per_day: 0.35,
            noise_level: 1.0,
            informative_channels: 2,
            noise_channels: 2,
            machine_spread: 0.5,
            channel_period_s: 60.0,
            vibration_rate_hz: 4096.0,
            vibration_duration_s: 1.0,
            geometry: BearingGeometry::default(),
            epoch_unix_s: 1_577_836_800,
        }
    }
}

impl GeneratorProfile {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidProfile(String::from(m)));
        let (lo, hi) = self.run_days;
        if !(lo >= 1.0 && hi >= lo && hi.is_finite()) {
            return bad("run_days must satisfy 1 <= min <= max");
        }
        let (dlo, dhi) = self.degradation_days;
        if !(dlo >= 0.0 && dhi >= dlo && dhi.is_finite()) {
            return bad("degradation_days must satisfy 0 <= min <= max");
        }
        if !(self.drift_per_day >= 0.0 && self.drift_per_day.is_finite()) {
            return bad("drift_per_day must be non-negative");
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return bad("noise_level must be non-negative");
        }
        if !(self.machine_spread >= 0.0 && self.machine_spread.is_finite()) {
            return bad("machine_spread must be non-negative");
        }
        if !(self.channel_period_s > 0.0 && self.channel_period_s <= SECONDS_PER_HOUR) {
            return bad("channel_period_s must lie in (0, 3600]");
        }
        if !(self.vibration_rate_hz > 0.0 && self.vibration_duration_s > 0.0) {
            return bad("vibration rate and duration must be positive");
        }
        if self.vibration_duration_s > SECONDS_PER_HOUR {
            return bad("vibration_duration_s must not exceed one hour");
        }
        if self.geometry.validate().is_err() {
            return bad("bearing geometry is invalid");
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.informative_channels + self.noise_channels
    }
}

fn channel_spec(k: usize) -> (String, f64, f64) {
    match CHANNELS.get(k) {
        Some(&(name, base, scale)) => (String::from(name), base, scale),
        None => (format!("sensor_{:02}", k + 1), 0.0, 1.0),
    }
}

/// Deterministic generator; run `i` depends only on `(seed, i, profile)` and
/// the maintenance assignment, so runs can be produced one at a time.
#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    seed: u64,
    profile: GeneratorProfile,
    kinds: Vec<Maintenance>,
}

impl SyntheticGenerator {
    pub fn new(
        seed: u64,
        n_corrective: usize,
        n_preventive: usize,
        profile: GeneratorProfile,
    ) -> Result<Self, DatasetError> {
        profile.validate()?;
        let mut kinds = Vec::with_capacity(n_corrective + n_preventive);
        kinds.extend(core::iter::repeat_n(Maintenance::Corrective, n_corrective));
        kinds.extend(core::iter::repeat_n(Maintenance::Preventive, n_preventive));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        kinds.shuffle(&mut rng);
        Ok(SyntheticGenerator { seed, profile, kinds })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn profile(&self) -> &GeneratorProfile {
        &self.profile
    }

    pub fn run_id(i: usize) -> String {
        format!("run-{:03}", i + 1)
    }

    /// Generates run `i` (0-based).
    pub fn run(&self, i: usize) -> Run {
        let p = &self.profile;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(i as u64 + 1);
        let maintenance = self.kinds[i];
        let corrective = maintenance == Maintenance::Corrective;

        let days = rng.random_range(p.run_days.0..=p.run_days.1);
        let n_hours = libm::round(days * 24.0).max(1.0) as usize;
        let duration_s = n_hours as f64 * SECONDS_PER_HOUR;
        let onset_days = rng.random_range(p.degradation_days.0..=p.degradation_days.1);
        let onset_s = if corrective {
            (duration_s - onset_days * SECONDS_PER_DAY).max(0.0)
        } else {
            f64::INFINITY
        };
        // degradation level, in noise units, at `s` seconds since start
        let degradation = |s: f64| p.drift_per_day * ((s - onset_s) / SECONDS_PER_DAY).max(0.0);

        let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };

        let mut channels = Vec::with_capacity(p.n_channels());
        for k in 0..p.n_channels() {
            let (name, base, scale) = channel_spec(k);
            let informative = k < p.informative_channels;
            let offset = p.machine_spread * gauss(&mut rng);
            let phase = rng.random_range(0.0..2.0 * PI);
            let wander = if informative { 0.0 } else { rng.random_range(-1.0..1.0) };
            let n = libm::floor(duration_s / p.channel_period_s) as usize;
            let mut timestamps_s = Vec::with_capacity(n);
            let mut values = Vec::with_capacity(n);
            for j in 0..n {
                let s = j as f64 * p.channel_period_s;
                let cycle = 0.5 * libm::sin(2.0 * PI * s / SECONDS_PER_DAY + phase);
                let drift = if informative { degradation(s) } else { wander * s / duration_s };
                let noise = p.noise_level * gauss(&mut rng);
                timestamps_s.push(s);
                values.push(base + scale * (offset + cycle + drift + noise));
            }
            channels.push(SensorChannel {
                name,
                sample_period_s: p.channel_period_s,
                timestamps_s,
                values,
            });
        }

        let bearing = bearing_frequencies(&p.geometry).expect("profile geometry validated");
        let shaft = p.geometry.shaft_hz;
        let shaft_gain = 1.0 + 0.1 * p.machine_spread * gauss(&mut rng);
        let noise_gain = (1.0 + 0.1 * p.machine_spread * gauss(&mut rng)).max(0.1);
        let n_samples = libm::round(p.vibration_duration_s * p.vibration_rate_hz) as usize;
        let dt = 1.0 / p.vibration_rate_hz;
        let mut vibration = Vec::with_capacity(n_hours);
        for h in 0..n_hours {
            let start_s = h as f64 * SECONDS_PER_HOUR;
            let d = degradation(start_s);
            let tones = [
                (shaft, shaft_gain),
                (2.0 * shaft, 0.4 * shaft_gain),
                (3.0 * shaft, 0.15 * shaft_gain),
                (bearing.bpfo, 0.05 + 0.15 * d),
            ];
            let phases: Vec<f64> = tones.iter().map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let sigma = 0.3 * p.noise_level * noise_gain * (1.0 + 0.25 * d);
            let samples = (0..n_samples)
                .map(|i| {
                    let t = i as f64 * dt;
                    let mut x = sigma * gauss(&mut rng);
                    for ((f, a), ph) in tones.iter().zip(&phases) {
                        x += a * libm::sin(2.0 * PI * f * t + ph);
                    }
                    x
                })
                .collect();
            vibration.push(AcquisitionWindow {
                start_s,
                sample_rate_hz: p.vibration_rate_hz,
                samples,
            });
        }

        let start_unix_s = p.epoch_unix_s + i as i64 * 45 * SECONDS_PER_DAY as i64;
        Run {
            id: Self::run_id(i),
            maintenance,
            start_unix_s,
            end_unix_s: start_unix_s + (n_hours as i64) * SECONDS_PER_HOUR as i64,
            channels,
            vibration,
        }
    }

    pub fn runs(&self) -> impl Iterator<Item = Run> + '_ {
        (0..self.len()).map(move |i| self.run(i))
    }
}

/// Generates a full dataset in memory.
pub fn generate_synthetic(
    seed: u64,
    n_corrective: usize,
    n_preventive: usize,
    profile: &GeneratorProfile,
) -> Result<Dataset, DatasetError> {
    let generator = SyntheticGenerator::new(seed, n_corrective, n_preventive, profile.clone())?;
    Dataset::new(generator.runs().collect())
}
