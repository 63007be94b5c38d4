//! Run-grouped double cross-validation.
//!
//! The outer loop holds out one fold of runs for testing. On the remaining
//! (inner) runs a leave-one-run-out loop picks the level-1 hyperparameters
//! by a sample-level metric, the alarm threshold is tuned on the held-out
//! indicators of the chosen point, and the pipeline is refit on all inner
//! runs before it sees the test fold. Scalers and feature selection are
//! refit on every training split.

mod cv;
mod folds;
mod pipeline;

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::decision::{DecisionError, Direction};
use crate::features::{FeatureError, DEFAULT_SMOOTHING_HOURS};
use crate::labelling::{LabelError, LabelScheme};
use crate::scoring::{ScoringError, ScoringParams};
use crate::selection::{SelectionError, DEFAULT_K};
use crate::svm::{KernelSpec, SolverParams, SvmError};

pub use cv::{
    double_cv, double_cv_sweep, evaluate_test_runs, inner_select, AlarmRule, CvResult, FitTrace, FoldResult,
    InnerSelection, RunIndicator,
    tune_rule,
};
pub use folds::{plan_folds, FoldPlan};
pub use pipeline::{
    binary_f1, macro_f1, mean_absolute_error, training_rows, Level1Model, Preprocessor, TrainedPipeline,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValidationError {
    #[error("{n_folds} folds requested but only {corrective} corrective runs")]
    TooManyFolds { n_folds: usize, corrective: usize },
    #[error("hyperparameter grid is empty")]
    GridEmpty,
    #[error("need {needed} corrective runs in the inner set, got {got}")]
    InsufficientCorrectiveRuns { needed: usize, got: usize },
    #[error("no training rows: {0}")]
    NoTrainingData(String),
    #[error("unknown run `{0}`")]
    UnknownRun(String),
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Decision(#[from] DecisionError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

impl ValidationError {
    /// Errors meaning "this training set cannot produce a model" rather than
    /// a defect in inputs or a solver failure.
    pub fn is_untrainable(&self) -> bool {
        matches!(
            self,
            ValidationError::InsufficientCorrectiveRuns { .. }
                | ValidationError::NoTrainingData(_)
                | ValidationError::Selection(SelectionError::TooFewRuns(_))
                | ValidationError::Svm(SvmError::SingleClassInput)
                | ValidationError::Svm(SvmError::TooFewClasses(_))
                | ValidationError::Svm(SvmError::EmptyInput)
        )
    }
}

/// Level-1 formulation. Each value is one row of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Formulation {
    /// The most relevant feature, oriented to increase towards failure.
    Univariate,
    Binary { w_days: f64 },
    Multiclass { windows_days: Vec<f64> },
    /// Trained on rows more than `healthy_days` before failure.
    OneClass { healthy_days: f64 },
    Rul,
    LifePct,
    ReLu { td_days: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormulationKind {
    Univariate,
    Binary,
    Multiclass,
    OneClass,
    Regression,
}

impl Formulation {
    pub fn kind(&self) -> FormulationKind {
        match self {
            Formulation::Univariate => FormulationKind::Univariate,
            Formulation::Binary { .. } => FormulationKind::Binary,
            Formulation::Multiclass { .. } => FormulationKind::Multiclass,
            Formulation::OneClass { .. } => FormulationKind::OneClass,
            Formulation::Rul | Formulation::LifePct | Formulation::ReLu { .. } => FormulationKind::Regression,
        }
    }

    /// Direction of the alarm on the health indicator.
    pub fn direction(&self) -> Direction {
        match self {
            Formulation::Rul => Direction::Below,
            _ => Direction::Above,
        }
    }

    /// Regression scheme without the training-split normaliser.
    pub fn regression_scheme(&self) -> Option<LabelScheme> {
        match self {
            Formulation::Rul => Some(LabelScheme::Rul { normalizer_hours: None }),
            Formulation::LifePct => Some(LabelScheme::LifePct),
            Formulation::ReLu { td_days } => Some(LabelScheme::ReLu { td_days: *td_days }),
            _ => None,
        }
    }

    /// Runs without a failure are dropped from training.
    pub fn skips_preventive(&self) -> bool {
        matches!(self, Formulation::Rul | Formulation::LifePct)
    }

    /// The eleven rows of the reference comparison.
    pub fn table() -> Vec<Formulation> {
        let mut v = alloc::vec![Formulation::Univariate];
        for w in [3.0, 5.0, 7.0, 10.0] {
            v.push(Formulation::Binary { w_days: w });
        }
        v.push(Formulation::Multiclass { windows_days: alloc::vec![10.0, 5.0] });
        v.push(Formulation::Multiclass { windows_days: alloc::vec![10.0, 8.0, 6.0, 4.0, 2.0] });
        v.push(Formulation::OneClass { healthy_days: 15.0 });
        v.push(Formulation::Rul);
        v.push(Formulation::LifePct);
        v.push(Formulation::ReLu { td_days: 10.0 });
        v
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formulation::Univariate => write!(f, "univariate"),
            Formulation::Binary { w_days } => write!(f, "binary_{w_days}d"),
            Formulation::Multiclass { windows_days } => write!(f, "multiclass_{}", windows_days.len() + 1),
            Formulation::OneClass { .. } => write!(f, "one_class"),
            Formulation::Rul => write!(f, "rul"),
            Formulation::LifePct => write!(f, "life_pct"),
            Formulation::ReLu { .. } => write!(f, "relu"),
        }
    }
}

/// One grid point. Axes that do not apply to a formulation are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kernel: Option<KernelSpec>,
    pub c: Option<f64>,
    pub nu: Option<f64>,
    pub epsilon: Option<f64>,
}

impl Hyperparams {
    pub const NONE: Hyperparams = Hyperparams { kernel: None, c: None, nu: None, epsilon: None };

    fn key(&self) -> [f64; 6] {
        let (rank, gamma) = match self.kernel {
            None => (0.0, 0.0),
            Some(KernelSpec::Linear) => (1.0, 0.0),
            Some(KernelSpec::Rbf { gamma }) => (2.0, gamma),
        };
        let o = |v: Option<f64>| v.unwrap_or(f64::NEG_INFINITY);
        [rank, gamma, o(self.c), o(self.nu), o(self.epsilon), 0.0]
    }

    /// Fixed lexical order over `(kernel, γ, C, ν, ε)`.
    pub fn lexical_cmp(&self, other: &Hyperparams) -> Ordering {
        for (a, b) in self.key().iter().zip(other.key()) {
            match a.total_cmp(&b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        match self.kernel {
            Some(KernelSpec::Linear) => parts.push("kernel=linear".into()),
            Some(KernelSpec::Rbf { gamma }) => parts.push(alloc::format!("kernel=rbf gamma={gamma}")),
            None => {}
        }
        if let Some(c) = self.c {
            parts.push(alloc::format!("C={c}"));
        }
        if let Some(nu) = self.nu {
            parts.push(alloc::format!("nu={nu}"));
        }
        if let Some(e) = self.epsilon {
            parts.push(alloc::format!("epsilon={e}"));
        }
        if parts.is_empty() {
            return write!(f, "-");
        }
        write!(f, "{}", parts.join(" "))
    }
}

/// Hyperparameter axes; a formulation uses the subset that applies to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperGrid {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
    pub linear: bool,
    pub rbf: bool,
    pub nu: Vec<f64>,
    pub epsilon: Vec<f64>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            c: alloc::vec![1e-2, 1e-1, 1.0, 10.0],
            gamma: alloc::vec![1e-5, 1e-4, 1e-3],
            linear: true,
            rbf: true,
            nu: alloc::vec![0.01, 0.05, 0.1, 0.5],
            epsilon: alloc::vec![0.01, 0.1, 0.5],
        }
    }
}

impl HyperGrid {
    /// Reference grid of a formulation.
    pub fn table4(formulation: &Formulation) -> HyperGrid {
        let mut g = HyperGrid::default();
        if formulation.kind() == FormulationKind::OneClass {
            g.gamma = alloc::vec![1e-4, 1e-3, 1e-2];
        }
        g
    }

    fn kernels(&self) -> Vec<KernelSpec> {
        let mut k = Vec::new();
        if self.linear {
            k.push(KernelSpec::Linear);
        }
        if self.rbf {
            k.extend(self.gamma.iter().map(|&gamma| KernelSpec::Rbf { gamma }));
        }
        k
    }

    /// All points in lexical order.
    pub fn points(&self, formulation: &Formulation) -> Result<Vec<Hyperparams>, ValidationError> {
        let mut out = Vec::new();
        match formulation.kind() {
            FormulationKind::Univariate => out.push(Hyperparams::NONE),
            FormulationKind::Binary | FormulationKind::Multiclass => {
                for kernel in self.kernels() {
                    for &c in &self.c {
                        out.push(Hyperparams { kernel: Some(kernel), c: Some(c), ..Hyperparams::NONE });
                    }
                }
            }
            FormulationKind::OneClass => {
                for kernel in self.kernels() {
                    for &nu in &self.nu {
                        out.push(Hyperparams { kernel: Some(kernel), nu: Some(nu), ..Hyperparams::NONE });
                    }
                }
            }
            FormulationKind::Regression => {
                for kernel in self.kernels() {
                    for &c in &self.c {
                        for &e in &self.epsilon {
                            out.push(Hyperparams {
                                kernel: Some(kernel),
                                c: Some(c),
                                epsilon: Some(e),
                                ..Hyperparams::NONE
                            });
                        }
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(ValidationError::GridEmpty);
        }
        out.sort_by(Hyperparams::lexical_cmp);
        Ok(out)
    }
}

/// Settings shared by every formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Features kept by the selection step.
    pub k_features: usize,
    pub smoothing_hours: usize,
    /// Every `train_stride_hours`-th row (counted back from the run end)
    /// enters training and the redundancy estimate.
    pub train_stride_hours: usize,
    /// Score monotonicity and trendability on corrective runs only.
    pub selection_corrective_only: bool,
    pub solver: SolverParams,
    pub scoring: ScoringParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_features: DEFAULT_K,
            smoothing_hours: DEFAULT_SMOOTHING_HOURS,
            train_stride_hours: 12,
            selection_corrective_only: true,
            solver: SolverParams::default(),
            scoring: ScoringParams::default(),
        }
    }
}
