//! Kernel machines solved by SMO.
//!
//! Every model predicts with `f(x) = Σ c_i K(x_i, x) + b`, where the
//! coefficients are `y_i α_i` (SVC), `α_i` (one-class) or `α_i - α_i*`
//! (SVR). The decision value, not a class, is what the pipeline uses as the
//! health indicator.

mod kernel;
mod smo;
mod train;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use kernel::{KernelSpec, FULL_GRAM_LIMIT};
pub use smo::{SolveReport, SolverParams};
pub use train::{train_multiclass, train_one_class, train_svc, train_svr};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SvmError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("need at least two classes, got {0}")]
    TooFewClasses(usize),
    #[error("non-finite feature value in sample {0}")]
    NonFiniteFeature(usize),
    #[error("non-finite target in sample {0}")]
    NonFiniteTarget(usize),
    #[error("nu must lie in (0, 1), got {0}")]
    InvalidNu(f64),
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("SMO did not converge within {iterations} iterations")]
    NonConvergence { iterations: u64 },
    #[error("no training samples")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmKind {
    Svc,
    OneClass,
    Svr,
}

/// A trained model. For the linear kernel the primal weight vector is kept
/// alongside the support vectors and used for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct SvmModel {
    kind: SvmKind,
    kernel: KernelSpec,
    dim: usize,
    support_vectors: Vec<Vec<f64>>,
    dual_coeffs: Vec<f64>,
    offset: f64,
    report: SolveReport,
    weights: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    kind: SvmKind,
    kernel: KernelSpec,
    dim: usize,
    support_vectors: Vec<Vec<f64>>,
    dual_coeffs: Vec<f64>,
    offset: f64,
    report: SolveReport,
}

impl From<SvmModel> for ModelDoc {
    fn from(m: SvmModel) -> Self {
        ModelDoc {
            kind: m.kind,
            kernel: m.kernel,
            dim: m.dim,
            support_vectors: m.support_vectors,
            dual_coeffs: m.dual_coeffs,
            offset: m.offset,
            report: m.report,
        }
    }
}

impl TryFrom<ModelDoc> for SvmModel {
    type Error = SvmError;

    fn try_from(d: ModelDoc) -> Result<Self, SvmError> {
        SvmModel::from_parts(d.kind, d.kernel, d.dim, d.support_vectors, d.dual_coeffs, d.offset, d.report)
    }
}

impl SvmModel {
    pub fn from_parts(
        kind: SvmKind,
        kernel: KernelSpec,
        dim: usize,
        support_vectors: Vec<Vec<f64>>,
        dual_coeffs: Vec<f64>,
        offset: f64,
        report: SolveReport,
    ) -> Result<Self, SvmError> {
        if !kernel.is_valid() {
            return Err(SvmError::InvalidParam("kernel gamma must be positive"));
        }
        if support_vectors.len() != dual_coeffs.len() {
            return Err(SvmError::InvalidParam("one coefficient per support vector"));
        }
        if let Some(sv) = support_vectors.iter().find(|sv| sv.len() != dim) {
            return Err(SvmError::DimensionMismatch { expected: dim, got: sv.len() });
        }
        if let Some(i) = support_vectors.iter().position(|sv| sv.iter().any(|v| !v.is_finite())) {
            return Err(SvmError::NonFiniteFeature(i));
        }
        if !offset.is_finite() || dual_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SvmError::InvalidParam("coefficients must be finite"));
        }
        let weights = match kernel {
            KernelSpec::Linear => {
                let mut w = alloc::vec![0.0; dim];
                for (sv, c) in support_vectors.iter().zip(&dual_coeffs) {
                    for (wk, v) in w.iter_mut().zip(sv) {
                        *wk += c * v;
                    }
                }
                Some(w)
            }
            KernelSpec::Rbf { .. } => None,
        };
        Ok(SvmModel { kind, kernel, dim, support_vectors, dual_coeffs, offset, report, weights })
    }

    pub fn kind(&self) -> SvmKind {
        self.kind
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_vectors(&self) -> &[Vec<f64>] {
        &self.support_vectors
    }

    pub fn dual_coeffs(&self) -> &[f64] {
        &self.dual_coeffs
    }

    /// Constant `b` added to the kernel expansion.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn report(&self) -> &SolveReport {
        &self.report
    }

    pub fn n_support(&self) -> usize {
        self.support_vectors.len()
    }

    /// Signed decision value `f(x)`.
    pub fn decision(&self, x: &[f64]) -> Result<f64, SvmError> {
        if x.len() != self.dim {
            return Err(SvmError::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.decision_unchecked(x))
    }

    fn decision_unchecked(&self, x: &[f64]) -> f64 {
        match &self.weights {
            Some(w) => kernel::dot(w, x) + self.offset,
            None => {
                self.support_vectors
                    .iter()
                    .zip(&self.dual_coeffs)
                    .map(|(sv, c)| c * self.kernel.eval(sv, x))
                    .sum::<f64>()
                    + self.offset
            }
        }
    }

    /// Decision values of many rows.
    pub fn decision_batch<'a>(&self, rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Vec<f64>, SvmError> {
        rows.into_iter().map(|x| self.decision(x)).collect()
    }
}

/// One-versus-rest ensemble; entry `j` separates class `classes[j]` from the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticlassModel {
    pub classes: Vec<usize>,
    pub models: Vec<SvmModel>,
}

impl MulticlassModel {
    pub fn decisions(&self, x: &[f64]) -> Result<Vec<f64>, SvmError> {
        self.models.iter().map(|m| m.decision(x)).collect()
    }

    /// Class with the largest decision value; the first one wins ties.
    pub fn predict(&self, x: &[f64]) -> Result<usize, SvmError> {
        let d = self.decisions(x)?;
        let mut best = 0;
        for (j, v) in d.iter().enumerate() {
            if *v > d[best] {
                best = j;
            }
        }
        Ok(self.classes[best])
    }
}
