//! Hourly aggregates of slow sensor channels.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::run_store::{SensorChannel, SECONDS_PER_HOUR};
use crate::stats;

use super::FeatureError;

pub const CHANNEL_AGGREGATES: [&str; 6] = ["mean", "max", "min", "std", "skewness", "kurtosis"];

pub fn channel_feature_names(channel: &str) -> Vec<String> {
    CHANNEL_AGGREGATES
        .iter()
        .map(|agg| format!("{channel}_{agg}"))
        .collect()
}

/// Six population statistics of a slice of samples.
pub fn aggregate(samples: &[f64]) -> Result<[f64; 6], FeatureError> {
    if samples.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    Ok([
        stats::mean(samples),
        max,
        min,
        stats::std_dev(samples),
        stats::skewness(samples),
        stats::kurtosis(samples),
    ])
}

/// Aggregates of the channel's samples in `[hour, hour + 1)` hours since start.
pub fn non_vibration_features(channel: &SensorChannel, hour: usize) -> Result<[f64; 6], FeatureError> {
    let lo = hour as f64 * SECONDS_PER_HOUR;
    let hi = lo + SECONDS_PER_HOUR;
    let a = channel.timestamps_s.partition_point(|&t| t < lo);
    let b = channel.timestamps_s.partition_point(|&t| t < hi);
    aggregate(&channel.values[a..b]).map_err(|_| FeatureError::EmptyHour {
        channel: channel.name.clone(),
        hour,
    })
}
