//! Preprocessing, level-1 training and sample-level metrics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{scale_and_smooth, FeatureMatrix, ScalerState};
use crate::labelling::{binary_labels, regression_labels, window_labels, LabelScheme, Labels, NF};
use crate::selection::{correlation, prognostic_scores, select_features, ProgScores};
use crate::svm::{
    train_multiclass, train_one_class, train_svc, train_svr, KernelSpec, MulticlassModel, SvmModel,
};
use crate::HOURS_PER_DAY;

use super::{Formulation, FormulationKind, Hyperparams, PipelineConfig, ValidationError};

/// Scaler and feature subset fitted on one training split. The stored
/// scaler covers only the selected features, in selection order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub scaler: ScalerState,
    pub smoothing_hours: usize,
}

impl Preprocessor {
    pub fn fit(training: &[&FeatureMatrix], k: usize, cfg: &PipelineConfig) -> Result<Preprocessor, ValidationError> {
        Ok(Self::fit_scored(training, k, cfg)?.0)
    }

    /// [`Preprocessor::fit`], also returning the relevance scores of every
    /// scaled feature.
    pub fn fit_scored(
        training: &[&FeatureMatrix],
        k: usize,
        cfg: &PipelineConfig,
    ) -> Result<(Preprocessor, ProgScores), ValidationError> {
        let full = ScalerState::fit(training)?;
        let scaled: Vec<FeatureMatrix> = training
            .iter()
            .map(|fm| scale_and_smooth(fm, &full, cfg.smoothing_hours))
            .collect::<Result<_, _>>()?;
        let refs: Vec<&FeatureMatrix> = scaled.iter().collect();
        let scores = prognostic_scores(&refs, cfg.selection_corrective_only)?;
        let corr = correlation(&refs, cfg.train_stride_hours)?;
        let selected = select_features(&scores, &corr, k.min(scores.len()))?;
        let mut scaler = ScalerState { names: Vec::new(), mean: Vec::new(), std: Vec::new() };
        for name in selected {
            let i = full.names.iter().position(|n| *n == name).expect("selected from the scaled columns");
            scaler.names.push(name);
            scaler.mean.push(full.mean[i]);
            scaler.std.push(full.std[i]);
        }
        Ok((Preprocessor { scaler, smoothing_hours: cfg.smoothing_hours }, scores))
    }

    pub fn selected(&self) -> &[String] {
        &self.scaler.names
    }

    pub fn transform(&self, fm: &FeatureMatrix) -> Result<FeatureMatrix, ValidationError> {
        Ok(scale_and_smooth(fm, &self.scaler, self.smoothing_hours)?)
    }
}

/// Rows used for training: every `stride`-th row counted back from the last.
pub fn training_rows(n_rows: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    (0..n_rows).filter(|r| (n_rows - 1 - r) % stride == 0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum Level1Model {
    /// The single selected feature times `sign`.
    Univariate { sign: f64 },
    Svc(SvmModel),
    OneClass(SvmModel),
    Svr(SvmModel),
    Multiclass(MulticlassModel),
}

impl Level1Model {
    /// Health indicator series of a transformed run. Multiclass models
    /// yield one series per class in ascending class order, so series 0 is
    /// the healthy class.
    pub fn indicators(&self, x: &FeatureMatrix) -> Result<Vec<Vec<f64>>, ValidationError> {
        Ok(match self {
            Level1Model::Univariate { sign } => {
                alloc::vec![x.column(0).into_iter().map(|v| sign * v).collect()]
            }
            Level1Model::Svc(m) | Level1Model::Svr(m) => alloc::vec![m.decision_batch(x.rows())?],
            Level1Model::OneClass(m) => {
                alloc::vec![m.decision_batch(x.rows())?.into_iter().map(|v| -v).collect()]
            }
            Level1Model::Multiclass(m) => m
                .models
                .iter()
                .map(|model| model.decision_batch(x.rows()))
                .collect::<Result<_, _>>()?,
        })
    }
}

/// Preprocessing and level-1 model fitted on one set of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    pub formulation: Formulation,
    pub hyperparams: Hyperparams,
    pub preprocessor: Preprocessor,
    pub model: Level1Model,
    /// Remaining-life normaliser of the training split, in hours.
    pub rul_normalizer_hours: Option<f64>,
}

impl TrainedPipeline {
    pub fn fit(
        training: &[&FeatureMatrix],
        formulation: &Formulation,
        hp: &Hyperparams,
        cfg: &PipelineConfig,
    ) -> Result<TrainedPipeline, ValidationError> {
        let pre = Preprocessor::fit(training, feature_budget(formulation, cfg), cfg)?;
        let transformed: Vec<FeatureMatrix> =
            training.iter().map(|fm| pre.transform(fm)).collect::<Result<_, _>>()?;
        let refs: Vec<&FeatureMatrix> = transformed.iter().collect();
        let (model, rul) = train_level1(&refs, formulation, hp, cfg)?;
        Ok(TrainedPipeline {
            formulation: formulation.clone(),
            hyperparams: *hp,
            preprocessor: pre,
            model,
            rul_normalizer_hours: rul,
        })
    }

    /// Health indicators of a raw feature matrix.
    pub fn indicators(&self, fm: &FeatureMatrix) -> Result<Vec<Vec<f64>>, ValidationError> {
        self.model.indicators(&self.preprocessor.transform(fm)?)
    }
}

pub(crate) fn feature_budget(formulation: &Formulation, cfg: &PipelineConfig) -> usize {
    match formulation {
        Formulation::Univariate => 1,
        _ => cfg.k_features,
    }
}

/// Largest corrective duration among the training runs.
pub(crate) fn rul_normalizer(training: &[&FeatureMatrix]) -> Result<f64, ValidationError> {
    training
        .iter()
        .filter(|fm| fm.meta.is_corrective())
        .map(|fm| fm.meta.duration_hours)
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))))
        .ok_or(ValidationError::InsufficientCorrectiveRuns { needed: 1, got: 0 })
}

pub(crate) fn scheme_for(formulation: &Formulation, rul_hours: Option<f64>) -> Option<LabelScheme> {
    match formulation.regression_scheme()? {
        LabelScheme::Rul { .. } => Some(LabelScheme::Rul { normalizer_hours: rul_hours }),
        s => Some(s),
    }
}

fn healthy_row(fm: &FeatureMatrix, r: usize, healthy_days: f64) -> bool {
    match fm.meta.failure_hour() {
        None => true,
        Some(t) => (r as f64) < t - healthy_days * HOURS_PER_DAY,
    }
}

fn missing(kind: &str) -> ValidationError {
    ValidationError::NoTrainingData(kind.into())
}

/// Trains the level-1 model on already transformed runs.
pub(crate) fn train_level1(
    training: &[&FeatureMatrix],
    formulation: &Formulation,
    hp: &Hyperparams,
    cfg: &PipelineConfig,
) -> Result<(Level1Model, Option<f64>), ValidationError> {
    let stride = cfg.train_stride_hours;
    let kernel = || hp.kernel.unwrap_or(KernelSpec::Linear);
    let c = || hp.c.ok_or(missing("C"));
    match formulation {
        Formulation::Univariate => {
            let deltas: Vec<f64> = training
                .iter()
                .filter(|fm| fm.meta.is_corrective() && fm.n_rows() > 0)
                .map(|fm| fm.get(fm.n_rows() - 1, 0) - fm.get(0, 0))
                .collect();
            if deltas.is_empty() {
                return Err(ValidationError::InsufficientCorrectiveRuns { needed: 1, got: 0 });
            }
            let sign = if deltas.iter().sum::<f64>() >= 0.0 { 1.0 } else { -1.0 };
            Ok((Level1Model::Univariate { sign }, None))
        }
        Formulation::Binary { w_days } => {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for fm in training {
                let Labels::Classes(l) = binary_labels(&fm.meta, *w_days)?.values else { unreachable!() };
                for r in training_rows(fm.n_rows(), stride) {
                    x.push(fm.row(r).to_vec());
                    y.push(if l[r] == NF { -1.0 } else { 1.0 });
                }
            }
            Ok((Level1Model::Svc(train_svc(&x, &y, c()?, kernel(), &cfg.solver)?), None))
        }
        Formulation::Multiclass { windows_days } => {
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for fm in training {
                let l = window_labels(&fm.meta, windows_days)?;
                for r in training_rows(fm.n_rows(), stride) {
                    x.push(fm.row(r).to_vec());
                    y.push(l[r]);
                }
            }
            let m = train_multiclass(&x, &y, c()?, kernel(), &cfg.solver)?;
            if m.classes.first() != Some(&NF) {
                return Err(missing("healthy class"));
            }
            Ok((Level1Model::Multiclass(m), None))
        }
        Formulation::OneClass { healthy_days } => {
            let mut x = Vec::new();
            for fm in training {
                for r in training_rows(fm.n_rows(), stride) {
                    if healthy_row(fm, r, *healthy_days) {
                        x.push(fm.row(r).to_vec());
                    }
                }
            }
            if x.is_empty() {
                return Err(missing("healthy rows"));
            }
            let nu = hp.nu.ok_or(missing("nu"))?;
            Ok((Level1Model::OneClass(train_one_class(&x, nu, kernel(), &cfg.solver)?), None))
        }
        Formulation::Rul | Formulation::LifePct | Formulation::ReLu { .. } => {
            let rul = match formulation {
                Formulation::Rul => Some(rul_normalizer(training)?),
                _ => None,
            };
            let scheme = scheme_for(formulation, rul).expect("regression formulation");
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for fm in training {
                let Some(series) = regression_labels(&fm.meta, &scheme)? else { continue };
                let Labels::Targets(t) = series.values else { unreachable!() };
                for r in training_rows(fm.n_rows(), stride) {
                    x.push(fm.row(r).to_vec());
                    y.push(t[r]);
                }
            }
            if x.is_empty() {
                return Err(missing("regression targets"));
            }
            let eps = hp.epsilon.ok_or(missing("epsilon"))?;
            Ok((Level1Model::Svr(train_svr(&x, &y, c()?, eps, kernel(), &cfg.solver)?), rul))
        }
    }
}

/// F1 of the positive class; zero when nothing is predicted or present.
pub fn binary_f1(truth: &[bool], pred: &[bool]) -> f64 {
    let mut c = Counts::default();
    for (&t, &p) in truth.iter().zip(pred) {
        c.add(t, p);
    }
    c.f1()
}

/// Unweighted mean of per-class F1 over the classes that occur in either
/// the truth or the predictions.
pub fn macro_f1(truth: &[usize], pred: &[usize]) -> f64 {
    let mut per: BTreeMap<usize, Counts> = BTreeMap::new();
    for (&t, &p) in truth.iter().zip(pred) {
        if t == p {
            per.entry(t).or_default().tp += 1;
        } else {
            per.entry(t).or_default().fn_ += 1;
            per.entry(p).or_default().fp += 1;
        }
    }
    if per.is_empty() {
        return 0.0;
    }
    per.values().map(Counts::f1).sum::<f64>() / per.len() as f64
}

pub fn mean_absolute_error(truth: &[f64], pred: &[f64]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / truth.len() as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Counts {
    tp: usize,
    fp: usize,
    fn_: usize,
}

impl Counts {
    fn add(&mut self, truth: bool, pred: bool) {
        match (truth, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => {}
        }
    }

    pub(crate) fn merge(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            return 0.0;
        }
        2.0 * self.tp as f64 / denom as f64
    }
}

/// Pooled sample-level metric over held-out runs; larger is better.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum MetricAcc {
    None,
    Binary(Counts),
    Multi(BTreeMap<usize, Counts>),
    Mae { sum: f64, n: usize },
}

impl MetricAcc {
    pub(crate) fn new(kind: FormulationKind) -> MetricAcc {
        match kind {
            FormulationKind::Univariate => MetricAcc::None,
            FormulationKind::Binary | FormulationKind::OneClass => MetricAcc::Binary(Counts::default()),
            FormulationKind::Multiclass => MetricAcc::Multi(BTreeMap::new()),
            FormulationKind::Regression => MetricAcc::Mae { sum: 0.0, n: 0 },
        }
    }

    /// Adds the rows of one held-out run.
    pub(crate) fn add_run(
        &mut self,
        fm: &FeatureMatrix,
        formulation: &Formulation,
        model: &Level1Model,
        series: &[Vec<f64>],
        rul_hours: Option<f64>,
    ) -> Result<(), ValidationError> {
        match (self, formulation) {
            (MetricAcc::None, _) => {}
            (MetricAcc::Binary(c), Formulation::Binary { w_days }) => {
                let positive = window_labels(&fm.meta, &[*w_days])?;
                for (l, h) in positive.iter().zip(&series[0]) {
                    c.add(*l != NF, *h > 0.0);
                }
            }
            (MetricAcc::Binary(c), Formulation::OneClass { healthy_days }) => {
                // indicator is -f, so f < 0 means faulty
                for (r, h) in series[0].iter().enumerate() {
                    c.add(!healthy_row(fm, r, *healthy_days), *h > 0.0);
                }
            }
            (MetricAcc::Multi(per), Formulation::Multiclass { windows_days }) => {
                let Level1Model::Multiclass(m) = model else { unreachable!() };
                let truth = window_labels(&fm.meta, windows_days)?;
                for (r, &t) in truth.iter().enumerate() {
                    let mut best = 0;
                    for j in 1..series.len() {
                        if series[j][r] > series[best][r] {
                            best = j;
                        }
                    }
                    let p = m.classes[best];
                    if t == p {
                        per.entry(t).or_default().tp += 1;
                    } else {
                        per.entry(t).or_default().fn_ += 1;
                        per.entry(p).or_default().fp += 1;
                    }
                }
            }
            (MetricAcc::Mae { sum, n }, _) => {
                let scheme = scheme_for(formulation, rul_hours).expect("regression formulation");
                if let Some(s) = regression_labels(&fm.meta, &scheme)? {
                    let Labels::Targets(t) = s.values else { unreachable!() };
                    for (y, h) in t.iter().zip(&series[0]) {
                        *sum += (y - h).abs();
                        *n += 1;
                    }
                }
            }
            _ => unreachable!("metric does not match the formulation"),
        }
        Ok(())
    }

    pub(crate) fn value(&self) -> f64 {
        match self {
            MetricAcc::None => 0.0,
            MetricAcc::Binary(c) => c.f1(),
            MetricAcc::Multi(per) => {
                if per.is_empty() {
                    0.0
                } else {
                    per.values().map(Counts::f1).sum::<f64>() / per.len() as f64
                }
            }
            MetricAcc::Mae { sum, n } => {
                if *n == 0 {
                    0.0
                } else {
                    -sum / *n as f64
                }
            }
        }
    }
}
