use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::decision::{
    aggregate, candidate_thresholds, multiclass_alarm, raise_alarm, tune_threshold, Aggregation, DecisionRule,
    ValidationSeries,
};
use crate::features::FeatureMatrix;
use crate::run_store::Maintenance;
use crate::scoring::{classify_run, score_dataset, Classification, RunOutcome, ScoreReport, ScoringParams};

use super::pipeline::{feature_budget, train_level1, MetricAcc, Preprocessor, TrainedPipeline};
use super::{Formulation, FormulationKind, FoldPlan, HyperGrid, Hyperparams, PipelineConfig, ValidationError};

#[cfg(feature = "parallel")]
fn map_all<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_all<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Indicator series of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIndicator {
    pub run_id: String,
    pub series: Vec<Vec<f64>>,
}

/// Which runs one preprocessing/model fit saw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub train_ids: Vec<String>,
    /// Run predicted by this fit during selection; `None` for the refit.
    pub heldout_id: Option<String>,
    pub selected: Vec<String>,
    pub scaler_mean: Vec<f64>,
}

impl FitTrace {
    fn new(train: &[&FeatureMatrix], heldout: Option<&FeatureMatrix>, pre: &Preprocessor) -> FitTrace {
        FitTrace {
            train_ids: train.iter().map(|fm| fm.run_id().to_string()).collect(),
            heldout_id: heldout.map(|fm| fm.run_id().to_string()),
            selected: pre.selected().to_vec(),
            scaler_mean: pre.scaler.mean.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSelection {
    pub hyperparams: Hyperparams,
    /// Pooled held-out metric of the chosen point; larger is better
    /// (negated error for regression).
    pub metric: f64,
    /// Metric of every point, `-∞` when some split could not train.
    pub point_metrics: Vec<(Hyperparams, f64)>,
    /// Leave-one-run-out indicators of the chosen point.
    pub validation: Vec<RunIndicator>,
    /// Refit on every inner run.
    pub pipeline: TrainedPipeline,
    pub traces: Vec<FitTrace>,
}

struct SplitOutcome {
    trace: FitTrace,
    /// Per grid point: metric accumulator and held-out series, or `None`
    /// when the point could not train on this split.
    points: Vec<Option<(MetricAcc, Vec<Vec<f64>>)>>,
}

fn run_split(
    runs: &[&FeatureMatrix],
    heldout: usize,
    formulation: &Formulation,
    points: &[Hyperparams],
    cfg: &PipelineConfig,
) -> Result<Option<SplitOutcome>, ValidationError> {
    let train: Vec<&FeatureMatrix> =
        runs.iter().enumerate().filter(|(i, _)| *i != heldout).map(|(_, fm)| *fm).collect();
    let pre = match Preprocessor::fit(&train, feature_budget(formulation, cfg), cfg) {
        Ok(p) => p,
        Err(e) if e.is_untrainable() => return Ok(None),
        Err(e) => return Err(e),
    };
    let trace = FitTrace::new(&train, Some(runs[heldout]), &pre);
    let transformed: Vec<FeatureMatrix> = train.iter().map(|fm| pre.transform(fm)).collect::<Result<_, _>>()?;
    let refs: Vec<&FeatureMatrix> = transformed.iter().collect();
    let test = pre.transform(runs[heldout])?;
    let mut out = Vec::with_capacity(points.len());
    for hp in points {
        let (model, rul) = match train_level1(&refs, formulation, hp, cfg) {
            Ok(m) => m,
            Err(e) if e.is_untrainable() => {
                out.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        let series = model.indicators(&test)?;
        let mut acc = MetricAcc::new(formulation.kind());
        acc.add_run(runs[heldout], formulation, &model, &series, rul)?;
        out.push(Some((acc, series)));
    }
    Ok(Some(SplitOutcome { trace, points: out }))
}

fn merge(into: &mut MetricAcc, from: MetricAcc) {
    match (into, from) {
        (MetricAcc::None, MetricAcc::None) => {}
        (MetricAcc::Binary(a), MetricAcc::Binary(b)) => a.merge(&b),
        (MetricAcc::Multi(a), MetricAcc::Multi(b)) => {
            for (k, v) in b {
                a.entry(k).or_default().merge(&v);
            }
        }
        (MetricAcc::Mae { sum, n }, MetricAcc::Mae { sum: s2, n: n2 }) => {
            *sum += s2;
            *n += n2;
        }
        _ => unreachable!("accumulators of one formulation"),
    }
}

/// Leave-one-run-out selection over `points`, then a refit with the chosen
/// point on all runs. Equal metrics go to the lexically first point.
pub fn inner_select(
    runs: &[&FeatureMatrix],
    formulation: &Formulation,
    points: &[Hyperparams],
    cfg: &PipelineConfig,
) -> Result<InnerSelection, ValidationError> {
    if points.is_empty() {
        return Err(ValidationError::GridEmpty);
    }
    // feature selection needs two failures; splits left with fewer are skipped
    let corrective = runs.iter().filter(|fm| fm.meta.is_corrective()).count();
    if corrective < 2 {
        return Err(ValidationError::InsufficientCorrectiveRuns { needed: 2, got: corrective });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(Hyperparams::lexical_cmp);
    let points = &sorted[..];
    let splits: Vec<usize> = (0..runs.len()).collect();
    let outcomes = map_all(&splits, |&s| run_split(runs, s, formulation, points, cfg));
    let mut traces = Vec::with_capacity(runs.len() + 1);
    let mut per_point: Vec<Option<(MetricAcc, Vec<RunIndicator>)>> =
        points.iter().map(|_| Some((MetricAcc::new(formulation.kind()), Vec::new()))).collect();
    for (s, outcome) in outcomes.into_iter().enumerate() {
        let Some(outcome) = outcome? else { continue };
        traces.push(outcome.trace);
        for (slot, result) in per_point.iter_mut().zip(outcome.points) {
            match (slot.as_mut(), result) {
                (Some((acc, series)), Some((a, h))) => {
                    merge(acc, a);
                    series.push(RunIndicator { run_id: runs[s].run_id().to_string(), series: h });
                }
                _ => *slot = None,
            }
        }
    }
    if traces.is_empty() {
        return Err(ValidationError::NoTrainingData(format!("no validation split of {formulation} can train")));
    }
    let point_metrics: Vec<(Hyperparams, f64)> = points
        .iter()
        .zip(&per_point)
        .map(|(hp, slot)| (*hp, slot.as_ref().map_or(f64::NEG_INFINITY, |(acc, _)| acc.value())))
        .collect();
    let mut best: Option<usize> = None;
    for (i, (_, m)) in point_metrics.iter().enumerate() {
        if per_point[i].is_some() && best.is_none_or(|b| *m > point_metrics[b].1) {
            best = Some(i);
        }
    }
    let Some(best) = best else {
        return Err(ValidationError::NoTrainingData(format!("no grid point of {formulation} trains on every split")));
    };
    let hp = points[best];
    let validation = per_point.swap_remove(best).expect("chosen point trained").1;
    let pipeline = TrainedPipeline::fit(runs, formulation, &hp, cfg)?;
    traces.push(FitTrace::new(runs, None, &pipeline.preprocessor));
    Ok(InnerSelection {
        hyperparams: hp,
        metric: point_metrics[best].1,
        point_metrics,
        validation,
        pipeline,
        traces,
    })
}

/// Level-2 rule: a tuned threshold, or the healthy-versus-faulty comparison
/// of a multiclass model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlarmRule {
    Threshold(DecisionRule),
    Multiclass { aggregation: Aggregation },
}

impl AlarmRule {
    pub fn aggregation(&self) -> Aggregation {
        match self {
            AlarmRule::Threshold(r) => r.aggregation,
            AlarmRule::Multiclass { aggregation } => *aggregation,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            AlarmRule::Threshold(r) => Some(r.threshold),
            AlarmRule::Multiclass { .. } => None,
        }
    }

    /// Row of the first alarm.
    pub fn alarm(&self, series: &[Vec<f64>]) -> Result<Option<usize>, ValidationError> {
        Ok(match self {
            AlarmRule::Threshold(r) => {
                let z = aggregate(&series[0], &r.aggregation)?;
                raise_alarm(&z, r.direction, r.threshold)
            }
            AlarmRule::Multiclass { aggregation } => multiclass_alarm(series, aggregation)?,
        })
    }
}

/// Tunes the level-2 rule on the held-out indicators of an inner selection.
/// Returns the rule and its validation objective.
pub fn tune_rule(
    runs: &[&FeatureMatrix],
    selection: &InnerSelection,
    aggregation: Aggregation,
    params: &ScoringParams,
) -> Result<(AlarmRule, f64), ValidationError> {
    let formulation = &selection.pipeline.formulation;
    let metas: Vec<_> = selection
        .validation
        .iter()
        .map(|ri| {
            runs.iter()
                .find(|fm| fm.run_id() == ri.run_id)
                .map(|fm| &fm.meta)
                .ok_or_else(|| ValidationError::UnknownRun(ri.run_id.clone()))
        })
        .collect::<Result<_, _>>()?;
    if formulation.kind() == FormulationKind::Multiclass {
        let rule = AlarmRule::Multiclass { aggregation };
        let mut outcomes = Vec::with_capacity(metas.len());
        for (meta, ri) in metas.iter().zip(&selection.validation) {
            let alarm = rule.alarm(&ri.series)?.map(|i| i as f64);
            outcomes.push(classify_run(meta, alarm, params.fp_horizon_days)?);
        }
        let objective = if outcomes.iter().any(|o| o.maintenance == Maintenance::Corrective) {
            score_dataset(&outcomes, params)?.final_score
        } else {
            let fp = outcomes.iter().filter(|o| o.classification == Classification::FalsePositive).count();
            1.0 - fp as f64 / outcomes.len().max(1) as f64
        };
        return Ok((rule, objective));
    }
    let z: Vec<Vec<f64>> =
        selection.validation.iter().map(|ri| aggregate(&ri.series[0], &aggregation)).collect::<Result<_, _>>()?;
    let zr: Vec<&[f64]> = z.iter().map(Vec::as_slice).collect();
    let candidates = candidate_thresholds(&zr);
    let series: Vec<ValidationSeries<'_>> =
        metas.iter().zip(&z).map(|(meta, z)| ValidationSeries { meta, z }).collect();
    let (rule, score) = tune_threshold(&series, aggregation, formulation.direction(), &candidates, params)?;
    Ok((AlarmRule::Threshold(rule), score))
}

/// Applies a trained pipeline and rule to test runs.
pub fn evaluate_test_runs(
    pipeline: &TrainedPipeline,
    rule: &AlarmRule,
    test: &[&FeatureMatrix],
    params: &ScoringParams,
) -> Result<(Vec<RunOutcome>, Vec<RunIndicator>), ValidationError> {
    let mut outcomes = Vec::with_capacity(test.len());
    let mut indicators = Vec::with_capacity(test.len());
    for fm in test {
        let series = pipeline.indicators(fm)?;
        let alarm = rule.alarm(&series)?.map(|i| i as f64);
        outcomes.push(classify_run(&fm.meta, alarm, params.fp_horizon_days)?);
        indicators.push(RunIndicator { run_id: fm.run_id().to_string(), series });
    }
    Ok((outcomes, indicators))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub inner_ids: Vec<String>,
    pub hyperparams: Option<Hyperparams>,
    pub inner_metric: Option<f64>,
    pub rule: Option<AlarmRule>,
    pub validation_objective: Option<f64>,
    pub pipeline: Option<TrainedPipeline>,
    pub outcomes: Vec<RunOutcome>,
    pub test_indicators: Vec<RunIndicator>,
    /// Why no model was trained; the test runs then raise no alarm.
    pub error: Option<String>,
    pub traces: Vec<FitTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub formulation: Formulation,
    pub aggregation: Aggregation,
    pub folds: Vec<FoldResult>,
    pub report: ScoreReport,
}

fn lookup<'a>(features: &'a [FeatureMatrix], id: &str) -> Result<&'a FeatureMatrix, ValidationError> {
    features.iter().find(|fm| fm.run_id() == id).ok_or_else(|| ValidationError::UnknownRun(id.into()))
}

fn run_fold(
    features: &[FeatureMatrix],
    fold: usize,
    plan: &FoldPlan,
    formulation: &Formulation,
    points: &[Hyperparams],
    aggregations: &[Aggregation],
    cfg: &PipelineConfig,
) -> Result<Vec<FoldResult>, ValidationError> {
    let test: Vec<&FeatureMatrix> =
        plan.folds[fold].iter().map(|id| lookup(features, id)).collect::<Result<_, _>>()?;
    let inner: Vec<&FeatureMatrix> =
        features.iter().filter(|fm| !plan.folds[fold].iter().any(|id| id == fm.run_id())).collect();
    let base = FoldResult {
        fold,
        test_ids: plan.folds[fold].clone(),
        inner_ids: inner.iter().map(|fm| fm.run_id().to_string()).collect(),
        hyperparams: None,
        inner_metric: None,
        rule: None,
        validation_objective: None,
        pipeline: None,
        outcomes: Vec::new(),
        test_indicators: Vec::new(),
        error: None,
        traces: Vec::new(),
    };
    let selection = match inner_select(&inner, formulation, points, cfg) {
        Ok(s) => s,
        Err(e) if e.is_untrainable() => {
            let outcomes = test
                .iter()
                .map(|fm| classify_run(&fm.meta, None, cfg.scoring.fp_horizon_days))
                .collect::<Result<Vec<_>, _>>()?;
            let failed = FoldResult { outcomes, error: Some(e.to_string()), ..base };
            return Ok(aggregations.iter().map(|_| failed.clone()).collect());
        }
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(aggregations.len());
    let mut test_series: Option<Vec<RunIndicator>> = None;
    for g in aggregations {
        let (rule, objective) = tune_rule(&inner, &selection, *g, &cfg.scoring)?;
        let series = match &test_series {
            Some(s) => s.clone(),
            None => {
                let s: Vec<RunIndicator> = test
                    .iter()
                    .map(|fm| {
                        Ok(RunIndicator { run_id: fm.run_id().to_string(), series: selection.pipeline.indicators(fm)? })
                    })
                    .collect::<Result<_, ValidationError>>()?;
                test_series = Some(s.clone());
                s
            }
        };
        let mut outcomes = Vec::with_capacity(test.len());
        for (fm, ri) in test.iter().zip(&series) {
            let alarm = rule.alarm(&ri.series)?.map(|i| i as f64);
            outcomes.push(classify_run(&fm.meta, alarm, cfg.scoring.fp_horizon_days)?);
        }
        out.push(FoldResult {
            hyperparams: Some(selection.hyperparams),
            inner_metric: Some(selection.metric),
            rule: Some(rule),
            validation_objective: Some(objective),
            pipeline: Some(selection.pipeline.clone()),
            outcomes,
            test_indicators: series,
            traces: selection.traces.clone(),
            ..base.clone()
        });
    }
    Ok(out)
}

/// Double cross-validation of one formulation under several aggregations.
/// The level-1 selection is shared; only the level-2 rule differs.
pub fn double_cv_sweep(
    features: &[FeatureMatrix],
    formulation: &Formulation,
    grid: &HyperGrid,
    aggregations: &[Aggregation],
    cfg: &PipelineConfig,
    plan: &FoldPlan,
) -> Result<Vec<CvResult>, ValidationError> {
    cfg.scoring.validate()?;
    let points = grid.points(formulation)?;
    for id in plan.folds.iter().flatten() {
        lookup(features, id)?;
    }
    let folds: Vec<usize> = (0..plan.len()).collect();
    let per_fold = map_all(&folds, |&f| run_fold(features, f, plan, formulation, &points, aggregations, cfg));
    let mut by_g: Vec<Vec<FoldResult>> = aggregations.iter().map(|_| Vec::new()).collect();
    for results in per_fold {
        for (slot, r) in by_g.iter_mut().zip(results?) {
            slot.push(r);
        }
    }
    aggregations
        .iter()
        .zip(by_g)
        .map(|(g, folds)| {
            let outcomes: Vec<RunOutcome> = folds.iter().flat_map(|f| f.outcomes.iter().cloned()).collect();
            let report = score_dataset(&outcomes, &cfg.scoring)?;
            Ok(CvResult { formulation: formulation.clone(), aggregation: *g, folds, report })
        })
        .collect()
}

pub fn double_cv(
    features: &[FeatureMatrix],
    formulation: &Formulation,
    grid: &HyperGrid,
    aggregation: Aggregation,
    cfg: &PipelineConfig,
    plan: &FoldPlan,
) -> Result<CvResult, ValidationError> {
    let mut r = double_cv_sweep(features, formulation, grid, &[aggregation], cfg, plan)?;
    Ok(r.remove(0))
}
