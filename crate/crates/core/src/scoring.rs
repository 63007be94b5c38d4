//! Run-level evaluation of first alarms: detection counts, the weighted
//! detection score, the timing ("business") score and their combination.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::run_store::{Maintenance, RunMeta};
use crate::HOURS_PER_DAY;

pub const DEFAULT_FP_HORIZON_DAYS: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoringError {
    #[error("scores need at least one corrective run and one run overall")]
    ZeroRuns,
    #[error("no corrective runs to score")]
    NoCorrectiveRuns,
    #[error("run `{run_id}` alarms {lead_days} days after its failure")]
    NegativeLeadBeyondRun { run_id: String, lead_days: f64 },
    #[error("invalid business curve: {0}")]
    InvalidCurve(&'static str),
    #[error("invalid scoring parameter `{0}`")]
    InvalidParam(&'static str),
}

/// Piecewise-linear score of the alarm lead time, zero outside the knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusinessCurve {
    /// `(lead_days, score)` pairs with strictly increasing lead.
    pub knots: Vec<(f64, f64)>,
}

impl Default for BusinessCurve {
    fn default() -> Self {
        BusinessCurve {
            knots: alloc::vec![(0.0, 0.0), (5.0, 0.9), (7.0, 1.0), (10.0, 0.9), (15.0, 0.0)],
        }
    }
}

impl BusinessCurve {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, ScoringError> {
        let curve = BusinessCurve { knots };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<(), ScoringError> {
        if self.knots.len() < 2 {
            return Err(ScoringError::InvalidCurve("need at least two knots"));
        }
        if self.knots.iter().any(|(x, y)| !x.is_finite() || !(0.0..=1.0).contains(y)) {
            return Err(ScoringError::InvalidCurve("scores must lie in [0, 1]"));
        }
        if self.knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(ScoringError::InvalidCurve("lead knots must be strictly increasing"));
        }
        Ok(())
    }

    pub fn eval(&self, lead_days: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if !(lead_days >= first.0 && lead_days <= last.0) {
            return 0.0;
        }
        let k = self.knots.partition_point(|(x, _)| *x <= lead_days);
        if k >= self.knots.len() {
            return last.1;
        }
        let (x0, y0) = self.knots[k - 1];
        let (x1, y1) = self.knots[k];
        y0 + (y1 - y0) * (lead_days - x0) / (x1 - x0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringParams {
    pub beta: f64,
    pub alpha: f64,
    pub curve: BusinessCurve,
    /// Alarms earlier than this before a failure count as false positives.
    pub fp_horizon_days: f64,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            beta: 0.5,
            alpha: 0.75,
            curve: BusinessCurve::default(),
            fp_horizon_days: DEFAULT_FP_HORIZON_DAYS,
        }
    }
}

impl ScoringParams {
    pub fn validate(&self) -> Result<(), ScoringError> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(ScoringError::InvalidParam("beta"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ScoringError::InvalidParam("alpha"));
        }
        if !(self.fp_horizon_days > 0.0 && self.fp_horizon_days.is_finite()) {
            return Err(ScoringError::InvalidParam("fp_horizon_days"));
        }
        self.curve.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    TruePositive,
    FalsePositive,
    Missed,
    CorrectSilence,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::TruePositive => "TP",
            Classification::FalsePositive => "FP",
            Classification::Missed => "missed",
            Classification::CorrectSilence => "silent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run_id: String,
    pub maintenance: Maintenance,
    /// Hours since installation of the first alarm.
    pub alarm_hour: Option<f64>,
    /// Days between the first alarm and the failure (corrective runs).
    pub lead_days: Option<f64>,
    pub classification: Classification,
}

/// Classifies the first alarm of a run.
pub fn classify_run(meta: &RunMeta, alarm_hour: Option<f64>, fp_horizon_days: f64) -> Result<RunOutcome, ScoringError> {
    let lead_days = match (meta.failure_hour(), alarm_hour) {
        (Some(t_fail), Some(t)) => Some((t_fail - t) / HOURS_PER_DAY),
        _ => None,
    };
    let classification = match (meta.maintenance, alarm_hour, lead_days) {
        (Maintenance::Preventive, Some(_), _) => Classification::FalsePositive,
        (Maintenance::Preventive, None, _) => Classification::CorrectSilence,
        (Maintenance::Corrective, None, _) => Classification::Missed,
        (Maintenance::Corrective, Some(_), Some(lead)) => {
            if lead < 0.0 {
                return Err(ScoringError::NegativeLeadBeyondRun { run_id: meta.id.clone(), lead_days: lead });
            }
            if lead > fp_horizon_days {
                Classification::FalsePositive
            } else {
                Classification::TruePositive
            }
        }
        (Maintenance::Corrective, Some(_), None) => unreachable!("corrective runs have a failure time"),
    };
    Ok(RunOutcome { run_id: meta.id.clone(), maintenance: meta.maintenance, alarm_hour, lead_days, classification })
}

/// Weighted harmonic combination of `1 - FPR` and `TPR`.
pub fn f_score(fp: usize, tp: usize, c: usize, p: usize, beta: f64) -> Result<f64, ScoringError> {
    if c == 0 {
        return Err(ScoringError::ZeroRuns);
    }
    let fpr = fp as f64 / (c + p) as f64;
    let tpr = tp as f64 / c as f64;
    Ok(f_from_rates(fpr, tpr, beta))
}

pub fn f_from_rates(fpr: f64, tpr: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let spec = 1.0 - fpr;
    let denom = b2 * spec + tpr;
    if denom <= 0.0 {
        return 0.0;
    }
    (1.0 + b2) * spec * tpr / denom
}

/// Timing score of one run; no alarm scores zero.
pub fn business_score(lead_days: Option<f64>, curve: &BusinessCurve) -> f64 {
    lead_days.map_or(0.0, |l| curve.eval(l))
}

/// Weights of the detection and timing scores in the final score.
pub fn final_weights(alpha: f64, c: usize, p: usize) -> (f64, f64) {
    let w = (1.0 - alpha) * c as f64 / (c + p) as f64;
    let denom = w + alpha;
    if denom <= 0.0 {
        return (1.0, 0.0);
    }
    (alpha / denom, w / denom)
}

pub fn final_score(f: f64, b_mean: f64, alpha: f64, c: usize, p: usize) -> f64 {
    let (wf, wb) = final_weights(alpha, c, p);
    wf * f + wb * b_mean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub fp: usize,
    pub tp: usize,
    pub corrective: usize,
    pub preventive: usize,
    pub fpr: f64,
    pub tpr: f64,
    pub f_score: f64,
    pub business_mean: f64,
    pub final_score: f64,
    pub outcomes: Vec<RunOutcome>,
}

/// Pools run outcomes into one report; `business_mean` averages every
/// corrective run, so missed and early runs contribute zero.
pub fn score_dataset(outcomes: &[RunOutcome], params: &ScoringParams) -> Result<ScoreReport, ScoringError> {
    let corrective = outcomes.iter().filter(|o| o.maintenance == Maintenance::Corrective).count();
    if corrective == 0 {
        return Err(ScoringError::NoCorrectiveRuns);
    }
    let preventive = outcomes.len() - corrective;
    let count = |k: Classification| outcomes.iter().filter(|o| o.classification == k).count();
    let fp = count(Classification::FalsePositive);
    let tp = count(Classification::TruePositive);
    // summed in sorted order so the mean does not depend on outcome order
    let mut business: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.classification == Classification::TruePositive)
        .map(|o| business_score(o.lead_days, &params.curve))
        .collect();
    business.sort_by(f64::total_cmp);
    let business_sum: f64 = business.iter().sum();
    let business_mean = business_sum / corrective as f64;
    let f = f_score(fp, tp, corrective, preventive, params.beta)?;
    Ok(ScoreReport {
        fp,
        tp,
        corrective,
        preventive,
        fpr: fp as f64 / outcomes.len() as f64,
        tpr: tp as f64 / corrective as f64,
        f_score: f,
        business_mean,
        final_score: final_score(f, business_mean, params.alpha, corrective, preventive),
        outcomes: outcomes.to_vec(),
    })
}
