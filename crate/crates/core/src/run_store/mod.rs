//! Runs, sensor channels and vibration acquisitions.
//!
//! A [`Run`] covers one machine from installation (`t0`) to replacement
//! (`T`). Internally every timestamp is seconds since `t0`; absolute times are
//! only kept for the run bounds so that on-disk formats can be reproduced.

mod synthetic;

pub use synthetic::{generate_synthetic, GeneratorProfile, SyntheticGenerator};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Seconds in one hour.
pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// Largest fraction of missing samples a channel may have before the run is
/// rejected.
pub const MAX_MISSING_FRACTION: f64 = 0.10;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("duplicate run id `{0}`")]
    DuplicateRunId(String),
    #[error("run `{run_id}`: {description}")]
    InvariantViolation { run_id: String, description: String },
    #[error("invalid generator profile: {0}")]
    InvalidProfile(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Maintenance {
    /// Replaced after a failure; the run ends at the failure time.
    Corrective,
    /// Replaced without failure; no failure time exists.
    Preventive,
}

impl Maintenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Maintenance::Corrective => "corrective",
            Maintenance::Preventive => "preventive",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "corrective" => Some(Maintenance::Corrective),
            "preventive" => Some(Maintenance::Preventive),
            _ => None,
        }
    }
}

/// A slowly sampled scalar sensor (temperature, torque, pressure, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorChannel {
    pub name: String,
    /// Nominal sampling period in seconds.
    pub sample_period_s: f64,
    /// Seconds since run start, strictly increasing.
    pub timestamps_s: Vec<f64>,
    /// One value per timestamp; `NaN` marks a missing value before
    /// [`SensorChannel::fill_missing`] has run.
    pub values: Vec<f64>,
}

impl SensorChannel {
    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    /// Linearly interpolates missing values against time; leading and
    /// trailing gaps take the nearest observed value. Returns the number of
    /// filled samples. A channel with no observed value is left untouched.
    pub fn fill_missing(&mut self) -> usize {
        let missing = self.missing_count();
        if missing == 0 || missing == self.values.len() {
            return 0;
        }
        let known: Vec<usize> = (0..self.values.len())
            .filter(|&i| self.values[i].is_finite())
            .collect();
        let first = known[0];
        let last = *known.last().unwrap();
        for i in 0..first {
            self.values[i] = self.values[first];
        }
        for i in last + 1..self.values.len() {
            self.values[i] = self.values[last];
        }
        for pair in known.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if b == a + 1 {
                continue;
            }
            let (ta, tb) = (self.timestamps_s[a], self.timestamps_s[b]);
            let (va, vb) = (self.values[a], self.values[b]);
            for i in a + 1..b {
                let w = (self.timestamps_s[i] - ta) / (tb - ta);
                self.values[i] = va + w * (vb - va);
            }
        }
        missing
    }
}

/// One short, high-rate vibration acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionWindow {
    /// Seconds since run start.
    pub start_s: f64,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl AcquisitionWindow {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Index of the hourly row this acquisition belongs to.
    pub fn hour_index(&self) -> usize {
        libm::floor(self.start_s / SECONDS_PER_HOUR) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub id: String,
    pub maintenance: Maintenance,
    /// Installation time, Unix seconds (UTC).
    pub start_unix_s: i64,
    /// Replacement time, Unix seconds (UTC). For corrective runs this is the
    /// failure time.
    pub end_unix_s: i64,
    pub channels: Vec<SensorChannel>,
    pub vibration: Vec<AcquisitionWindow>,
}

impl Run {
    pub fn duration_hours(&self) -> f64 {
        (self.end_unix_s - self.start_unix_s) as f64 / SECONDS_PER_HOUR
    }

    /// Failure time in hours since start, for corrective runs only.
    pub fn failure_hour(&self) -> Option<f64> {
        match self.maintenance {
            Maintenance::Corrective => Some(self.duration_hours()),
            Maintenance::Preventive => None,
        }
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta {
            id: self.id.clone(),
            maintenance: self.maintenance,
            duration_hours: self.duration_hours(),
        }
    }

    /// Fills channel gaps and checks every run invariant.
    pub fn prepare(&mut self) -> Result<(), DatasetError> {
        for ch in &mut self.channels {
            let n = ch.values.len();
            let missing = ch.missing_count();
            if n > 0 && missing as f64 > MAX_MISSING_FRACTION * n as f64 {
                return Err(DatasetError::InvariantViolation {
                    run_id: self.id.clone(),
                    description: format!("channel `{}` has {missing} of {n} values missing", ch.name),
                });
            }
            ch.fill_missing();
        }
        self.validate()
    }

    fn violation(&self, description: String) -> DatasetError {
        DatasetError::InvariantViolation {
            run_id: self.id.clone(),
            description,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.start_unix_s >= self.end_unix_s {
            return Err(self.violation("start time is not before end time".into()));
        }
        let mut names = BTreeSet::new();
        for ch in &self.channels {
            if !names.insert(ch.name.as_str()) {
                return Err(self.violation(format!("channel `{}` appears twice", ch.name)));
            }
            if ch.timestamps_s.len() != ch.values.len() {
                return Err(self.violation(format!(
                    "channel `{}` has {} timestamps but {} values",
                    ch.name,
                    ch.timestamps_s.len(),
                    ch.values.len()
                )));
            }
            if ch.timestamps_s.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(self.violation(format!(
                    "channel `{}` timestamps are not strictly increasing",
                    ch.name
                )));
            }
            if ch.values.iter().any(|v| !v.is_finite()) {
                return Err(self.violation(format!("channel `{}` has non-finite values", ch.name)));
            }
        }
        let mut hours = BTreeSet::new();
        let duration_s = (self.end_unix_s - self.start_unix_s) as f64;
        for acq in &self.vibration {
            if !(acq.sample_rate_hz > 0.0) || acq.samples.is_empty() {
                return Err(self.violation("empty vibration acquisition".into()));
            }
            if acq.start_s < 0.0 || acq.start_s >= duration_s {
                return Err(self.violation(format!(
                    "vibration acquisition at {} s lies outside the run",
                    acq.start_s
                )));
            }
            if !hours.insert(acq.hour_index()) {
                return Err(self.violation(format!(
                    "more than one vibration acquisition in hour {}",
                    acq.hour_index()
                )));
            }
            if acq.samples.iter().any(|v| !v.is_finite()) {
                return Err(self.violation("vibration acquisition has non-finite samples".into()));
            }
        }
        Ok(())
    }
}

/// The parts of a run that labelling, scoring and validation need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub id: String,
    pub maintenance: Maintenance,
    pub duration_hours: f64,
}

impl RunMeta {
    /// Number of complete hourly rows in the run.
    pub fn n_rows(&self) -> usize {
        libm::floor(self.duration_hours + 1e-9) as usize
    }

    pub fn is_corrective(&self) -> bool {
        self.maintenance == Maintenance::Corrective
    }

    pub fn failure_hour(&self) -> Option<f64> {
        self.is_corrective().then_some(self.duration_hours)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    runs: Vec<Run>,
}

impl Dataset {
    /// Builds a dataset, rejecting duplicate ids and invalid runs.
    pub fn new(runs: Vec<Run>) -> Result<Self, DatasetError> {
        let mut ids = BTreeSet::new();
        for run in &runs {
            if !ids.insert(run.id.as_str()) {
                return Err(DatasetError::DuplicateRunId(run.id.clone()));
            }
            run.validate()?;
        }
        Ok(Dataset { runs })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn into_runs(self) -> Vec<Run> {
        self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn corrective_count(&self) -> usize {
        self.runs
            .iter()
            .filter(|r| r.maintenance == Maintenance::Corrective)
            .count()
    }

    pub fn preventive_count(&self) -> usize {
        self.len() - self.corrective_count()
    }
}
