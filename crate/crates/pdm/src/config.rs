//! Experiment configuration, read from a TOML document.
//!
//! Every section is optional; an empty document is the reference
//! experiment on the synthetic corpus. Errors carry the dotted path of the
//! offending field.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pdm_core::decision::Aggregation;
use pdm_core::features::BearingGeometry;
use pdm_core::labelling::window_labels;
use pdm_core::run_store::{GeneratorProfile, Maintenance, RunMeta};
use pdm_core::scoring::{ScoringError, ScoringParams};
use pdm_core::svm::SolverParams;
use pdm_core::validation::{Formulation, HyperGrid, PipelineConfig};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub solver: SolverParams,
    pub scoring: ScoringParams,
    pub validation: ValidationConfig,
    pub decision: DecisionConfig,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Dataset directory to load. When absent, `pdm generate` produces one.
    pub path: Option<PathBuf>,
    pub n_corrective: usize,
    pub n_preventive: usize,
    pub profile: GeneratorProfile,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { path: None, n_corrective: 11, n_preventive: 28, profile: GeneratorProfile::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Defaults to the generator's geometry.
    pub geometry: Option<BearingGeometry>,
    pub k: usize,
    pub smoothing_hours: usize,
    pub train_stride_hours: usize,
    pub selection_corrective_only: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        FeatureConfig {
            geometry: None,
            k: p.k_features,
            smoothing_hours: p.smoothing_hours,
            train_stride_hours: p.train_stride_hours,
            selection_corrective_only: p.selection_corrective_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    /// Outer folds; defaults to one per corrective run.
    pub n_folds: Option<usize>,
    pub formulations: Vec<FormulationSpec>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig { n_folds: None, formulations: Formulation::table().iter().map(FormulationSpec::from).collect() }
    }
}

/// One `[[validation.formulations]]` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulationSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_days: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows_days: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub healthy_days: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub td_days: Option<f64>,
    /// Replaces the reference grid of the formulation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<HyperGrid>,
}

impl From<&Formulation> for FormulationSpec {
    fn from(f: &Formulation) -> Self {
        let mut s = FormulationSpec {
            kind: String::new(),
            w_days: None,
            windows_days: None,
            healthy_days: None,
            td_days: None,
            grid: None,
        };
        s.kind = match f {
            Formulation::Univariate => "univariate",
            Formulation::Binary { w_days } => {
                s.w_days = Some(*w_days);
                "binary"
            }
            Formulation::Multiclass { windows_days } => {
                s.windows_days = Some(windows_days.clone());
                "multiclass"
            }
            Formulation::OneClass { healthy_days } => {
                s.healthy_days = Some(*healthy_days);
                "one_class"
            }
            Formulation::Rul => "rul",
            Formulation::LifePct => "life_pct",
            Formulation::ReLu { td_days } => {
                s.td_days = Some(*td_days);
                "relu"
            }
        }
        .to_string();
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionConfig {
    /// `identity`, `ma<H>h`, `ema<H>h` or `ema<H>h_exact`.
    pub aggregations: Vec<String>,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        let mut v = vec!["identity".to_string()];
        for h in [12, 24, 48, 120] {
            v.push(format!("ma{h}h"));
            v.push(format!("ema{h}h"));
        }
        DecisionConfig { aggregations: v }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            data: DataConfig::default(),
            features: FeatureConfig::default(),
            solver: SolverParams::default(),
            scoring: ScoringParams::default(),
            validation: ValidationConfig::default(),
            decision: DecisionConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

/// A formulation with the grid it is searched over.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulationRun {
    pub formulation: Formulation,
    pub grid: HyperGrid,
}

impl FormulationRun {
    pub fn name(&self) -> String {
        self.formulation.to_string()
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {v}")))
    }
}

impl FormulationSpec {
    pub fn resolve(&self, path: &str) -> Result<FormulationRun, ConfigError> {
        let unexpected = |field: &str, present: bool| {
            if present {
                Err(ConfigError::new(format!("{path}.{field}"), format!("not a parameter of `{}`", self.kind)))
            } else {
                Ok(())
            }
        };
        let (w, win, healthy, td) =
            (self.w_days.is_some(), self.windows_days.is_some(), self.healthy_days.is_some(), self.td_days.is_some());
        let formulation = match self.kind.as_str() {
            "univariate" | "rul" | "life_pct" => {
                unexpected("w_days", w)?;
                unexpected("windows_days", win)?;
                unexpected("healthy_days", healthy)?;
                unexpected("td_days", td)?;
                match self.kind.as_str() {
                    "univariate" => Formulation::Univariate,
                    "rul" => Formulation::Rul,
                    _ => Formulation::LifePct,
                }
            }
            "binary" => {
                unexpected("windows_days", win)?;
                unexpected("healthy_days", healthy)?;
                unexpected("td_days", td)?;
                Formulation::Binary { w_days: positive(&format!("{path}.w_days"), self.w_days.unwrap_or(10.0))? }
            }
            "multiclass" => {
                unexpected("w_days", w)?;
                unexpected("healthy_days", healthy)?;
                unexpected("td_days", td)?;
                let windows = self.windows_days.clone().unwrap_or_else(|| vec![10.0, 5.0]);
                let probe = RunMeta { id: String::new(), maintenance: Maintenance::Corrective, duration_hours: 24.0 };
                window_labels(&probe, &windows).map_err(|e| ConfigError::new(format!("{path}.windows_days"), e))?;
                Formulation::Multiclass { windows_days: windows }
            }
            "one_class" => {
                unexpected("w_days", w)?;
                unexpected("windows_days", win)?;
                unexpected("td_days", td)?;
                Formulation::OneClass {
                    healthy_days: positive(&format!("{path}.healthy_days"), self.healthy_days.unwrap_or(15.0))?,
                }
            }
            "relu" => {
                unexpected("w_days", w)?;
                unexpected("windows_days", win)?;
                unexpected("healthy_days", healthy)?;
                Formulation::ReLu { td_days: positive(&format!("{path}.td_days"), self.td_days.unwrap_or(10.0))? }
            }
            other => {
                return Err(ConfigError::new(
                    format!("{path}.kind"),
                    format!(
                        "unknown formulation `{other}`; expected univariate, binary, multiclass, one_class, rul, \
                         life_pct or relu"
                    ),
                ))
            }
        };
        let grid = self.grid.clone().unwrap_or_else(|| HyperGrid::table4(&formulation));
        let gpath = format!("{path}.grid");
        for &c in &grid.c {
            positive(&format!("{gpath}.c"), c)?;
        }
        for &g in &grid.gamma {
            positive(&format!("{gpath}.gamma"), g)?;
        }
        if let Some(&nu) = grid.nu.iter().find(|nu| !(**nu > 0.0 && **nu < 1.0)) {
            return Err(ConfigError::new(format!("{gpath}.nu"), format!("must lie in (0, 1), got {nu}")));
        }
        if let Some(&e) = grid.epsilon.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(ConfigError::new(format!("{gpath}.epsilon"), format!("must be non-negative, got {e}")));
        }
        grid.points(&formulation).map_err(|e| ConfigError::new(gpath, e))?;
        Ok(FormulationRun { formulation, grid })
    }
}

fn scoring_path(e: &ScoringError) -> String {
    match e {
        ScoringError::InvalidParam(name) => format!("scoring.{name}"),
        ScoringError::InvalidCurve(_) => "scoring.curve".into(),
        _ => "scoring".into(),
    }
}

impl ExperimentConfig {
    /// Parses a TOML document. Relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError::new("", e.message()))?;
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let path = if path == "." { String::new() } else { path };
            ConfigError::new(path, e.into_inner().message())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("--config", format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::parse(&text, &base)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.data.profile.validate().map_err(|e| ConfigError::new("data.profile", e))?;
        if let Some(p) = self.dataset_path() {
            if !p.join("manifest.csv").is_file() {
                return Err(ConfigError::new("data.path", format!("no manifest.csv under {}", p.display())));
            }
        }
        self.geometry().validate().map_err(|e| ConfigError::new("features.geometry", e))?;
        for (name, v) in [
            ("features.k", self.features.k),
            ("features.smoothing_hours", self.features.smoothing_hours),
            ("features.train_stride_hours", self.features.train_stride_hours),
        ] {
            if v == 0 {
                return Err(ConfigError::new(name, "must be at least 1"));
            }
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return Err(ConfigError::new("solver.max_iter", "must be at least 1"));
        }
        self.scoring.validate().map_err(|e| ConfigError::new(scoring_path(&e), e))?;
        if self.validation.n_folds == Some(0) {
            return Err(ConfigError::new("validation.n_folds", "must be at least 1"));
        }
        self.formulations()?;
        self.aggregations()?;
        Ok(())
    }

    pub fn dataset_path(&self) -> Option<PathBuf> {
        self.data.path.as_ref().map(|p| self.base_dir.join(p))
    }

    pub fn geometry(&self) -> BearingGeometry {
        self.features.geometry.unwrap_or(self.data.profile.geometry)
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            k_features: self.features.k,
            smoothing_hours: self.features.smoothing_hours,
            train_stride_hours: self.features.train_stride_hours,
            selection_corrective_only: self.features.selection_corrective_only,
            solver: self.solver,
            scoring: self.scoring.clone(),
        }
    }

    pub fn formulations(&self) -> Result<Vec<FormulationRun>, ConfigError> {
        if self.validation.formulations.is_empty() {
            return Err(ConfigError::new("validation.formulations", "no formulation to run"));
        }
        let mut names = BTreeSet::new();
        let mut out = Vec::new();
        for (i, spec) in self.validation.formulations.iter().enumerate() {
            let path = format!("validation.formulations[{i}]");
            let run = spec.resolve(&path)?;
            if !names.insert(run.name()) {
                return Err(ConfigError::new(path, format!("formulation `{}` appears twice", run.name())));
            }
            out.push(run);
        }
        Ok(out)
    }

    pub fn aggregations(&self) -> Result<Vec<Aggregation>, ConfigError> {
        if self.decision.aggregations.is_empty() {
            return Err(ConfigError::new("decision.aggregations", "no aggregation to run"));
        }
        let mut out: Vec<Aggregation> = Vec::new();
        for (i, s) in self.decision.aggregations.iter().enumerate() {
            let path = format!("decision.aggregations[{i}]");
            let g: Aggregation = s.parse().map_err(|e| ConfigError::new(&path, format!("`{s}`: {e}")))?;
            if out.contains(&g) {
                return Err(ConfigError::new(path, format!("`{g}` appears twice")));
            }
            out.push(g);
        }
        Ok(out)
    }
}
