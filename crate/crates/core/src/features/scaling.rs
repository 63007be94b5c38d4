//! Z-scoring against training runs followed by a causal moving average.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::stats;

use super::{FeatureError, FeatureMatrix};

pub const DEFAULT_SMOOTHING_HOURS: usize = 12;

/// Per-feature mean and standard deviation of the training rows.
/// Features whose training variance vanishes are not retained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerState {
    /// Fits on the pooled rows of `training`. All matrices must share the
    /// column layout of the first one.
    pub fn fit(training: &[&FeatureMatrix]) -> Result<ScalerState, FeatureError> {
        let Some(first) = training.first() else {
            return Ok(ScalerState { names: Vec::new(), mean: Vec::new(), std: Vec::new() });
        };
        let n_cols = first.n_cols();
        for fm in training {
            if fm.names != first.names {
                return Err(FeatureError::Shape("training matrices have different columns".into()));
            }
        }
        let n: usize = training.iter().map(|fm| fm.n_rows()).sum();
        let mut mean = alloc::vec![0.0; n_cols];
        for fm in training {
            for row in fm.rows() {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
        }
        mean.iter_mut().for_each(|m| *m /= n.max(1) as f64);
        let mut var = alloc::vec![0.0; n_cols];
        for fm in training {
            for row in fm.rows() {
                for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
        }
        let mut state = ScalerState { names: Vec::new(), mean: Vec::new(), std: Vec::new() };
        for c in 0..n_cols {
            let sd = libm::sqrt(var[c] / n.max(1) as f64);
            if sd > 1e-9 * mean[c].abs().max(1.0) {
                state.names.push(first.names[c].clone());
                state.mean.push(mean[c]);
                state.std.push(sd);
            }
        }
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Z-scores the retained features of `fm` and applies a trailing moving
/// average over `min(horizon, rows so far)` rows. Output row `t` depends only
/// on input rows `<= t`.
pub fn scale_and_smooth(
    fm: &FeatureMatrix,
    scaler: &ScalerState,
    horizon_hours: usize,
) -> Result<FeatureMatrix, FeatureError> {
    let mut columns = Vec::with_capacity(scaler.len());
    for ((name, m), s) in scaler.names.iter().zip(&scaler.mean).zip(&scaler.std) {
        let c = fm
            .column_index(name)
            .ok_or_else(|| FeatureError::UnknownFeature(name.clone()))?;
        let z: Vec<f64> = (0..fm.n_rows()).map(|r| (fm.get(r, c) - m) / s).collect();
        columns.push(stats::trailing_mean(&z, horizon_hours));
    }
    FeatureMatrix::from_columns(fm.meta.clone(), fm.hours.clone(), scaler.names.clone(), &columns)
}
