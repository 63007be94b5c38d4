//! Per-row training targets derived from the failure time.
//!
//! Row `i` of a run sits at `t = i` hours since installation; the failure
//! time `T` of a corrective run is its duration. Window boundaries are
//! half-open, `F` meaning `t >= T - w`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::run_store::RunMeta;
use crate::HOURS_PER_DAY;

/// Class id of the healthy (not-failing) class.
pub const NF: usize = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LabelError {
    #[error("window must be positive, got {0} days")]
    InvalidWindow(f64),
    #[error("windows must be strictly decreasing with at least one entry")]
    NonDecreasingWindows,
    #[error("missing labelling parameter `{0}`")]
    MissingParam(&'static str),
    #[error("cannot parse labelling scheme `{0}`")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum LabelScheme {
    Binary { w_days: f64 },
    Multi { windows_days: Vec<f64> },
    /// Remaining life divided by a normaliser, usually the longest training
    /// failure time.
    Rul { normalizer_hours: Option<f64> },
    LifePct,
    ReLu { td_days: f64 },
}

impl LabelScheme {
    pub fn is_regression(&self) -> bool {
        matches!(self, LabelScheme::Rul { .. } | LabelScheme::LifePct | LabelScheme::ReLu { .. })
    }

    /// Number of classes for classification schemes.
    pub fn n_classes(&self) -> Option<usize> {
        match self {
            LabelScheme::Binary { .. } => Some(2),
            LabelScheme::Multi { windows_days } => Some(windows_days.len() + 1),
            _ => None,
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelScheme::Binary { w_days } => write!(f, "binary:{w_days}"),
            LabelScheme::Multi { windows_days } => {
                write!(f, "multi:")?;
                for (i, w) in windows_days.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{w}")?;
                }
                Ok(())
            }
            LabelScheme::Rul { normalizer_hours: Some(d) } => write!(f, "rul:{d}"),
            LabelScheme::Rul { normalizer_hours: None } => write!(f, "rul"),
            LabelScheme::LifePct => write!(f, "lifepct"),
            LabelScheme::ReLu { td_days } => write!(f, "relu:{td_days}"),
        }
    }
}

/// Accepts `binary:<w>`, `multi:<w1>,<w2>,...`, `rul[:<D hours>]`,
/// `lifepct` and `relu:<t_d>`, day-valued unless stated.
impl FromStr for LabelScheme {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, LabelError> {
        let err = || LabelError::Parse(String::from(s));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| err());
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h.trim(), Some(a)),
            None => (s.trim(), None),
        };
        match (head, arg) {
            ("binary", Some(a)) => Ok(LabelScheme::Binary { w_days: num(a)? }),
            ("multi", Some(a)) => Ok(LabelScheme::Multi {
                windows_days: a.split(',').map(num).collect::<Result<_, _>>()?,
            }),
            ("rul", a) => Ok(LabelScheme::Rul { normalizer_hours: a.map(num).transpose()? }),
            ("lifepct", None) => Ok(LabelScheme::LifePct),
            ("relu", Some(a)) => Ok(LabelScheme::ReLu { td_days: num(a)? }),
            _ => Err(err()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Labels {
    Classes(Vec<usize>),
    Targets(Vec<f64>),
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(v) => v.len(),
            Labels::Targets(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSeries {
    pub run_id: String,
    pub scheme: LabelScheme,
    pub values: Labels,
}

fn hours_of(meta: &RunMeta) -> impl Iterator<Item = f64> {
    (0..meta.n_rows()).map(|i| i as f64)
}

fn check_windows(windows: &[f64]) -> Result<(), LabelError> {
    if windows.is_empty() {
        return Err(LabelError::NonDecreasingWindows);
    }
    if let Some(&w) = windows.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
        return Err(LabelError::InvalidWindow(w));
    }
    if windows.windows(2).any(|p| p[1] >= p[0]) {
        return Err(LabelError::NonDecreasingWindows);
    }
    Ok(())
}

/// Class `k` (1-based) covers `[T - w_k, T - w_{k+1})`, the last class ends at
/// `T`; everything earlier, and every preventive row, is [`NF`].
pub fn window_labels(meta: &RunMeta, windows_days: &[f64]) -> Result<Vec<usize>, LabelError> {
    check_windows(windows_days)?;
    let Some(failure) = meta.failure_hour() else {
        return Ok(alloc::vec![NF; meta.n_rows()]);
    };
    Ok(hours_of(meta)
        .map(|t| {
            // number of windows whose start has been reached
            windows_days
                .iter()
                .take_while(|w| t >= failure - *w * HOURS_PER_DAY)
                .count()
        })
        .collect())
}

pub fn binary_labels(meta: &RunMeta, w_days: f64) -> Result<LabelSeries, LabelError> {
    if !(w_days > 0.0 && w_days.is_finite()) {
        return Err(LabelError::InvalidWindow(w_days));
    }
    Ok(LabelSeries {
        run_id: meta.id.clone(),
        scheme: LabelScheme::Binary { w_days },
        values: Labels::Classes(window_labels(meta, &[w_days])?),
    })
}

pub fn multiclass_labels(meta: &RunMeta, windows_days: &[f64]) -> Result<LabelSeries, LabelError> {
    if windows_days.len() < 2 {
        return Err(LabelError::NonDecreasingWindows);
    }
    Ok(LabelSeries {
        run_id: meta.id.clone(),
        scheme: LabelScheme::Multi { windows_days: windows_days.to_vec() },
        values: Labels::Classes(window_labels(meta, windows_days)?),
    })
}

/// Regression targets, or `None` when the run carries no usable target
/// (preventive runs under the remaining-life schemes).
pub fn regression_labels(meta: &RunMeta, scheme: &LabelScheme) -> Result<Option<LabelSeries>, LabelError> {
    let failure = meta.failure_hour();
    let values: Vec<f64> = match scheme {
        LabelScheme::Rul { normalizer_hours } => {
            let d = normalizer_hours.ok_or(LabelError::MissingParam("normalizer_hours"))?;
            if !(d > 0.0 && d.is_finite()) {
                return Err(LabelError::InvalidWindow(d / HOURS_PER_DAY));
            }
            let Some(t_fail) = failure else { return Ok(None) };
            hours_of(meta).map(|t| (t_fail - t) / d).collect()
        }
        LabelScheme::LifePct => {
            let Some(t_fail) = failure else { return Ok(None) };
            hours_of(meta).map(|t| t / t_fail).collect()
        }
        LabelScheme::ReLu { td_days } => {
            if !(*td_days > 0.0 && td_days.is_finite()) {
                return Err(LabelError::InvalidWindow(*td_days));
            }
            let td = td_days * HOURS_PER_DAY;
            match failure {
                None => alloc::vec![0.0; meta.n_rows()],
                Some(t_fail) => hours_of(meta).map(|t| ((t - (t_fail - td)) / td).max(0.0)).collect(),
            }
        }
        LabelScheme::Binary { .. } | LabelScheme::Multi { .. } => {
            return Err(LabelError::MissingParam("regression scheme"));
        }
    };
    Ok(Some(LabelSeries { run_id: meta.id.clone(), scheme: scheme.clone(), values: Labels::Targets(values) }))
}

/// Labels under any scheme; `None` means the run is skipped for training.
pub fn labels(meta: &RunMeta, scheme: &LabelScheme) -> Result<Option<LabelSeries>, LabelError> {
    match scheme {
        LabelScheme::Binary { w_days } => binary_labels(meta, *w_days).map(Some),
        LabelScheme::Multi { windows_days } => multiclass_labels(meta, windows_days).map(Some),
        _ => regression_labels(meta, scheme),
    }
}
