//! Level 2: aggregate a health indicator, compare it with a threshold and
//! report the first alarm of each run.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::run_store::{Maintenance, RunMeta};
use crate::scoring::{classify_run, score_dataset, Classification, ScoringError, ScoringParams};
use crate::stats;
use crate::HOURS_PER_DAY;

/// Probability mass of the exact EMA window (`α = 1 - (1-p)^(1/H)`).
pub const EMA_EXACT_MASS: f64 = 0.86;
pub const CANDIDATE_QUANTILES: usize = 101;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecisionError {
    #[error("empty health indicator series")]
    EmptySeries,
    #[error("aggregation horizon must be at least one hour")]
    InvalidHorizon,
    #[error("multiclass alarms need the healthy series and at least one faulty one")]
    MissingNFSeries,
    #[error("no threshold candidates")]
    EmptyCandidates,
    #[error("no validation runs")]
    NoValidationRuns,
    #[error("unknown aggregation; expected identity, ma<H>h, ema<H>h or ema<H>h_exact")]
    UnknownAggregation,
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "g", rename_all = "snake_case")]
pub enum Aggregation {
    Identity,
    Ma { hours: usize },
    Ema { hours: usize, exact: bool },
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregation::Identity => write!(f, "identity"),
            Aggregation::Ma { hours } => write!(f, "ma{hours}h"),
            Aggregation::Ema { hours, exact: false } => write!(f, "ema{hours}h"),
            Aggregation::Ema { hours, exact: true } => write!(f, "ema{hours}h_exact"),
        }
    }
}

impl FromStr for Aggregation {
    type Err = DecisionError;

    /// Parses the [`fmt::Display`] form: `identity`, `ma24h`, `ema24h`,
    /// `ema24h_exact`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "identity" {
            return Ok(Aggregation::Identity);
        }
        let hours = |body: &str| -> Result<usize, DecisionError> {
            let h = body.strip_suffix('h').ok_or(DecisionError::UnknownAggregation)?;
            match h.parse::<usize>() {
                Ok(0) => Err(DecisionError::InvalidHorizon),
                Ok(h) => Ok(h),
                Err(_) => Err(DecisionError::UnknownAggregation),
            }
        };
        if let Some(rest) = s.strip_prefix("ema") {
            return match rest.strip_suffix("_exact") {
                Some(body) => Ok(Aggregation::Ema { hours: hours(body)?, exact: true }),
                None => Ok(Aggregation::Ema { hours: hours(rest)?, exact: false }),
            };
        }
        if let Some(rest) = s.strip_prefix("ma") {
            return Ok(Aggregation::Ma { hours: hours(rest)? });
        }
        Err(DecisionError::UnknownAggregation)
    }
}

pub fn ema_alpha(hours: usize, exact: bool) -> f64 {
    let h = hours as f64;
    if exact {
        1.0 - libm::exp(libm::log(1.0 - EMA_EXACT_MASS) / h)
    } else {
        2.0 / (h + 1.0)
    }
}

/// `z = g(h)`. The moving average covers the last `min(H, t + 1)` samples;
/// the exponential average starts at `z_0 = h_0`.
pub fn aggregate(h: &[f64], g: &Aggregation) -> Result<Vec<f64>, DecisionError> {
    if h.is_empty() {
        return Err(DecisionError::EmptySeries);
    }
    match *g {
        Aggregation::Identity => Ok(h.to_vec()),
        Aggregation::Ma { hours } => {
            if hours == 0 {
                return Err(DecisionError::InvalidHorizon);
            }
            Ok(stats::trailing_mean(h, hours))
        }
        Aggregation::Ema { hours, exact } => {
            if hours == 0 {
                return Err(DecisionError::InvalidHorizon);
            }
            let a = ema_alpha(hours, exact);
            let mut z = Vec::with_capacity(h.len());
            let mut prev = h[0];
            z.push(prev);
            for &v in &h[1..] {
                prev = a * v + (1.0 - a) * prev;
                z.push(prev);
            }
            Ok(z)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Alarm when `z > L`.
    Above,
    /// Alarm when `z < L`.
    Below,
}

impl Direction {
    #[inline]
    pub fn triggers(self, z: f64, threshold: f64) -> bool {
        match self {
            Direction::Above => z > threshold,
            Direction::Below => z < threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    pub aggregation: Aggregation,
    pub direction: Direction,
    /// `±∞` encode "always" and "never"; serialized as `"inf"`/`"-inf"`.
    #[serde(with = "extended_f64")]
    pub threshold: f64,
}

mod extended_f64 {
    use core::fmt;

    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            s.serialize_str("nan")
        }
    }

    struct ExtendedVisitor;

    impl Visitor<'_> for ExtendedVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number, \"inf\" or \"-inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtendedVisitor)
    }
}

/// Index of the first sample strictly beyond the threshold.
pub fn raise_alarm(z: &[f64], direction: Direction, threshold: f64) -> Option<usize> {
    z.iter().position(|&v| direction.triggers(v, threshold))
}

/// First index where some faulty series exceeds the healthy one.
/// `series[0]` is the healthy class.
pub fn multiclass_alarm(series: &[Vec<f64>], g: &Aggregation) -> Result<Option<usize>, DecisionError> {
    if series.len() < 2 {
        return Err(DecisionError::MissingNFSeries);
    }
    let z: Vec<Vec<f64>> = series.iter().map(|s| aggregate(s, g)).collect::<Result<_, _>>()?;
    let n = z.iter().map(Vec::len).min().unwrap_or(0);
    Ok((0..n).find(|&t| z[1..].iter().any(|f| f[t] > z[0][t])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub run_id: String,
    pub alarm_hour: Option<f64>,
    pub lead_days: Option<f64>,
}

impl AlarmEvent {
    /// Event for an alarm at row `index` (row `i` is hour `i`).
    pub fn at(meta: &RunMeta, index: Option<usize>) -> AlarmEvent {
        let alarm_hour = index.map(|i| i as f64);
        let lead_days = match (meta.failure_hour(), alarm_hour) {
            (Some(tf), Some(t)) => Some((tf - t) / HOURS_PER_DAY),
            _ => None,
        };
        AlarmEvent { run_id: meta.id.clone(), alarm_hour, lead_days }
    }
}

/// Quantiles `0%, 1%, ..., 100%` of the pooled values plus `±∞`, sorted and
/// deduplicated.
pub fn candidate_thresholds(series: &[&[f64]]) -> Vec<f64> {
    let pooled: Vec<f64> = series.iter().flat_map(|s| s.iter().copied()).filter(|v| v.is_finite()).collect();
    let probs: Vec<f64> = (0..CANDIDATE_QUANTILES)
        .map(|i| i as f64 / (CANDIDATE_QUANTILES - 1) as f64)
        .collect();
    let mut c = stats::quantiles(&pooled, &probs);
    c.push(f64::NEG_INFINITY);
    c.push(f64::INFINITY);
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// One validation run: its metadata and aggregated indicator `z`.
#[derive(Debug, Clone, Copy)]
pub struct ValidationSeries<'a> {
    pub meta: &'a RunMeta,
    pub z: &'a [f64],
}

/// Prefix extremes let the first crossing of any threshold be found by
/// binary search.
fn first_crossing(prefix: &[f64], direction: Direction, threshold: f64) -> Option<usize> {
    let i = match direction {
        Direction::Above => prefix.partition_point(|&m| !(m > threshold)),
        Direction::Below => prefix.partition_point(|&m| !(m < threshold)),
    };
    (i < prefix.len()).then_some(i)
}

fn prefix_extreme(z: &[f64], direction: Direction) -> Vec<f64> {
    let mut acc = match direction {
        Direction::Above => f64::NEG_INFINITY,
        Direction::Below => f64::INFINITY,
    };
    z.iter()
        .map(|&v| {
            acc = match direction {
                Direction::Above => acc.max(v),
                Direction::Below => acc.min(v),
            };
            acc
        })
        .collect()
}

/// Objective of a threshold on validation runs: the final score, or
/// `1 - FPR` when the runs contain no failure.
pub fn threshold_objective(
    runs: &[ValidationSeries<'_>],
    direction: Direction,
    threshold: f64,
    params: &ScoringParams,
) -> Result<f64, DecisionError> {
    let prefixes: Vec<Vec<f64>> = runs.iter().map(|r| prefix_extreme(r.z, direction)).collect();
    objective_with(runs, &prefixes, direction, threshold, params)
}

fn objective_with(
    runs: &[ValidationSeries<'_>],
    prefixes: &[Vec<f64>],
    direction: Direction,
    threshold: f64,
    params: &ScoringParams,
) -> Result<f64, DecisionError> {
    let mut outcomes = Vec::with_capacity(runs.len());
    for (r, prefix) in runs.iter().zip(prefixes) {
        let alarm = first_crossing(prefix, direction, threshold).map(|i| i as f64);
        outcomes.push(classify_run(r.meta, alarm, params.fp_horizon_days)?);
    }
    if outcomes.iter().any(|o| o.maintenance == Maintenance::Corrective) {
        Ok(score_dataset(&outcomes, params)?.final_score)
    } else {
        let fp = outcomes.iter().filter(|o| o.classification == Classification::FalsePositive).count();
        Ok(1.0 - fp as f64 / outcomes.len() as f64)
    }
}

/// Picks the candidate maximising [`threshold_objective`]. Among equal
/// scores the threshold raising the fewest alarms wins: the largest for
/// `Above`, the smallest for `Below`.
pub fn tune_threshold(
    runs: &[ValidationSeries<'_>],
    aggregation: Aggregation,
    direction: Direction,
    candidates: &[f64],
    params: &ScoringParams,
) -> Result<(DecisionRule, f64), DecisionError> {
    if candidates.is_empty() {
        return Err(DecisionError::EmptyCandidates);
    }
    if runs.is_empty() {
        return Err(DecisionError::NoValidationRuns);
    }
    let prefixes: Vec<Vec<f64>> = runs.iter().map(|r| prefix_extreme(r.z, direction)).collect();
    let mut best: Option<(f64, f64)> = None;
    for &l in candidates {
        let score = objective_with(runs, &prefixes, direction, l, params)?;
        let better = match best {
            None => true,
            Some((bl, bs)) => {
                score > bs
                    || (score == bs
                        && match direction {
                            Direction::Above => l > bl,
                            Direction::Below => l < bl,
                        })
            }
        };
        if better {
            best = Some((l, score));
        }
    }
    let (threshold, score) = best.expect("candidates are non-empty");
    Ok((DecisionRule { aggregation, direction, threshold }, score))
}
