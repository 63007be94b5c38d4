//! Hourly feature matrices built from raw runs.
//!
//! Each run becomes one [`FeatureMatrix`] row per complete hour. Vibration
//! columns come from the acquisition recorded in that hour (carried forward
//! when an hour has none); channel columns aggregate every sample of the hour.

mod channel;
mod frequency;
mod scaling;
mod spectrum;
mod time_domain;

pub use channel::{channel_feature_names, non_vibration_features, CHANNEL_AGGREGATES};
pub use frequency::{
    bearing_frequencies, frequency_domain_features, frequency_domain_names, BearingFrequencies,
    BearingGeometry, SpectralFeatures, AMPLITUDE_TOLERANCE_HZ, BAND_COUNT, BAND_LIMIT_HZ,
    BAND_WIDTH_HZ,
};
pub use scaling::{scale_and_smooth, ScalerState, DEFAULT_SMOOTHING_HOURS};
pub use spectrum::{amplitude_spectrum, fft_in_place, hann, Spectrum};
pub use time_domain::{time_domain_features, TimeDomainFeatures, TIME_DOMAIN_NAMES};

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::run_store::{Run, RunMeta};

/// Minimum run length accepted by [`build_feature_matrix`].
pub const MIN_RUN_HOURS: usize = 24;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("empty window")]
    EmptyWindow,
    #[error("invalid bearing geometry: {0}")]
    InvalidGeometry(String),
    #[error("window has {samples} samples, at least {required} required")]
    WindowTooShort { samples: usize, required: usize },
    #[error("sample rate {0} Hz is below the 2 kHz minimum")]
    RateTooLow(f64),
    #[error("channel `{channel}` has no samples in hour {hour}")]
    EmptyHour { channel: String, hour: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("run is {hours} h long, at least 24 h required")]
    RunTooShort { hours: usize },
    #[error("run has no vibration acquisitions")]
    NoAcquisitions,
    #[error("feature matrix shape mismatch: {0}")]
    Shape(String),
    #[error("run `{run_id}`, hour {hour}: {source}")]
    AtHour {
        run_id: String,
        hour: usize,
        source: Box<FeatureError>,
    },
}

/// Hourly features of one run, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub meta: RunMeta,
    /// Hours since run start for each row.
    pub hours: Vec<f64>,
    pub names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        meta: RunMeta,
        hours: Vec<f64>,
        names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if values.len() != hours.len() * names.len() {
            return Err(FeatureError::Shape(alloc::format!(
                "{} values for {} rows x {} columns",
                values.len(),
                hours.len(),
                names.len()
            )));
        }
        let unique: BTreeSet<&str> = names.iter().map(String::as_str).collect();
        if unique.len() != names.len() {
            return Err(FeatureError::Shape("feature names are not unique".to_string()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::Shape("non-finite feature value".to_string()));
        }
        Ok(FeatureMatrix {
            meta,
            hours,
            names,
            values,
        })
    }

    pub fn run_id(&self) -> &str {
        &self.meta.id
    }

    pub fn n_rows(&self) -> usize {
        self.hours.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        let n = self.n_cols().max(1);
        self.values.chunks(n).take(self.n_rows())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let n = self.n_cols();
        self.values[row * n + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|r| self.get(r, col)).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Projects onto the given columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| FeatureError::UnknownFeature(n.clone())))
            .collect::<Result<_, _>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for r in 0..self.n_rows() {
            let row = self.row(r);
            values.extend(idx.iter().map(|&c| row[c]));
        }
        Ok(FeatureMatrix {
            meta: self.meta.clone(),
            hours: self.hours.clone(),
            names: names.to_vec(),
            values,
        })
    }

    /// Builds a matrix from column vectors.
    pub fn from_columns(
        meta: RunMeta,
        hours: Vec<f64>,
        names: Vec<String>,
        columns: &[Vec<f64>],
    ) -> Result<FeatureMatrix, FeatureError> {
        let n_rows = hours.len();
        if columns.len() != names.len() || columns.iter().any(|c| c.len() != n_rows) {
            return Err(FeatureError::Shape("column lengths disagree".to_string()));
        }
        let mut values = Vec::with_capacity(n_rows * columns.len());
        for r in 0..n_rows {
            values.extend(columns.iter().map(|c| c[r]));
        }
        FeatureMatrix::new(meta, hours, names, values)
    }
}

/// Names of the vibration columns: time-domain statistics followed by the
/// spectral features.
pub fn vibration_feature_names() -> Vec<String> {
    let mut names: Vec<String> = TIME_DOMAIN_NAMES.iter().map(|s| s.to_string()).collect();
    names.extend(frequency_domain_names());
    names
}

/// Full column list for a run with the given channel names.
pub fn feature_names<'a>(channels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut names = vibration_feature_names();
    for ch in channels {
        names.extend(channel_feature_names(ch));
    }
    names
}

fn vibration_row(samples: &[f64], rate: f64, geom: &BearingGeometry) -> Result<Vec<f64>, FeatureError> {
    let td = time_domain_features(samples)?;
    let fd = frequency_domain_features(samples, rate, geom)?;
    let mut row = Vec::with_capacity(10 + 65);
    row.extend_from_slice(&td.values());
    row.extend(fd.values());
    Ok(row)
}

/// Extracts the hourly feature matrix of a run.
pub fn build_feature_matrix(run: &Run, geom: &BearingGeometry) -> Result<FeatureMatrix, FeatureError> {
    geom.validate()?;
    let meta = run.meta();
    let n_rows = meta.n_rows();
    if n_rows < MIN_RUN_HOURS {
        return Err(FeatureError::RunTooShort { hours: n_rows });
    }
    if run.vibration.is_empty() {
        return Err(FeatureError::NoAcquisitions);
    }
    let at_hour = |hour: usize, e: FeatureError| FeatureError::AtHour {
        run_id: run.id.clone(),
        hour,
        source: Box::new(e),
    };

    let mut by_hour: Vec<Option<usize>> = alloc::vec![None; n_rows];
    for (i, acq) in run.vibration.iter().enumerate() {
        let h = acq.hour_index();
        if h < n_rows {
            by_hour[h] = Some(i);
        }
    }
    let mut vib_rows: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_rows);
    for (hour, slot) in by_hour.iter().enumerate() {
        vib_rows.push(match slot {
            Some(i) => {
                let acq = &run.vibration[*i];
                Some(vibration_row(&acq.samples, acq.sample_rate_hz, geom).map_err(|e| at_hour(hour, e))?)
            }
            None => None,
        });
    }
    // hours before the first acquisition take the first available row
    let first = vib_rows
        .iter()
        .find_map(|r| r.clone())
        .ok_or(FeatureError::NoAcquisitions)?;
    let mut previous = first;

    let names = feature_names(run.channels.iter().map(|c| c.name.as_str()));
    let mut values = Vec::with_capacity(n_rows * names.len());
    for (hour, row) in vib_rows.into_iter().enumerate() {
        if let Some(r) = row {
            previous = r;
        }
        values.extend_from_slice(&previous);
        for ch in &run.channels {
            let agg = non_vibration_features(ch, hour).map_err(|e| at_hour(hour, e))?;
            values.extend_from_slice(&agg);
        }
    }
    let hours = (0..n_rows).map(|h| h as f64).collect();
    FeatureMatrix::new(meta, hours, names, values)
}
