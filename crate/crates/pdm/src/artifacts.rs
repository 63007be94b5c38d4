//! Stage outputs: feature tables, selected features, fold models, alarm
//! logs and score reports.

use std::fs;
use std::path::Path;

use pdm_core::features::FeatureMatrix;
use pdm_core::labelling::{LabelSeries, Labels};
use pdm_core::run_store::{Maintenance, RunMeta};
use pdm_core::scoring::{f_score, final_score, RunOutcome, ScoreReport};
use pdm_core::selection::ProgScores;
use pdm_core::validation::{AlarmRule, CvResult, FoldResult, Formulation, Hyperparams, RunIndicator, TrainedPipeline};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::dataset::{check_header, csv_err, flush, fmt_f64, parse_f64, reader, writer};
use crate::error::DataError;

pub const FORMAT_VERSION: u32 = 1;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| DataError::Inconsistent(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(DataError::io(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let text = fs::read_to_string(path).map_err(DataError::io(path))?;
    serde_json::from_str(&text).map_err(|e| DataError::malformed(path, e.line() as u64, e))
}

// ---- feature tables -------------------------------------------------------

const FEATURE_MANIFEST_HEADER: [&str; 3] = ["run_id", "maintenance", "duration_hours"];

/// Writes `<dir>/<run>.csv`, `features.txt` and `manifest.csv`. With
/// labels, each run table gains a trailing `label` column (empty where the
/// scheme has no target).
pub fn write_features(dir: &Path, features: &[FeatureMatrix], labels: Option<&[Option<LabelSeries>]>) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(DataError::io(dir))?;
    let names = features.first().map(|fm| fm.names.clone()).unwrap_or_default();
    let registry = dir.join("features.txt");
    let mut text = names.join("\n");
    if !names.is_empty() {
        text.push('\n');
    }
    fs::write(&registry, text).map_err(DataError::io(&registry))?;

    let mpath = dir.join("manifest.csv");
    let mut m = writer(&mpath)?;
    m.write_record(FEATURE_MANIFEST_HEADER).map_err(csv_err(&mpath))?;
    for fm in features {
        m.write_record([fm.run_id(), fm.meta.maintenance.as_str(), &fmt_f64(fm.meta.duration_hours)])
            .map_err(csv_err(&mpath))?;
    }
    flush(m, &mpath)?;

    for (i, fm) in features.iter().enumerate() {
        if fm.names != names {
            return Err(DataError::Inconsistent(format!("run `{}` has a different feature layout", fm.run_id())));
        }
        let label = labels.map(|l| l[i].as_ref());
        let path = dir.join(format!("{}.csv", fm.run_id()));
        let mut w = writer(&path)?;
        let mut header = vec!["hours_since_start".to_string()];
        header.extend(names.iter().cloned());
        if label.is_some() {
            header.push("label".into());
        }
        w.write_record(&header).map_err(csv_err(&path))?;
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        for r in 0..fm.n_rows() {
            rec.clear();
            rec.push(fmt_f64(fm.hours[r]));
            rec.extend(fm.row(r).iter().map(|v| fmt_f64(*v)));
            if let Some(series) = label {
                rec.push(match series.map(|s| &s.values) {
                    Some(Labels::Classes(c)) => c.get(r).map(|v| v.to_string()).unwrap_or_default(),
                    Some(Labels::Targets(t)) => t.get(r).map(|v| fmt_f64(*v)).unwrap_or_default(),
                    None => String::new(),
                });
            }
            w.write_record(&rec).map_err(csv_err(&path))?;
        }
        flush(w, &path)?;
    }
    Ok(())
}

pub fn read_feature_manifest(dir: &Path) -> Result<Vec<RunMeta>, DataError> {
    let path = dir.join("manifest.csv");
    if !path.is_file() {
        return Err(DataError::StageDependencyMissing { what: "feature tables", path, command: "extract" });
    }
    let mut rdr = reader(&path)?;
    check_header(&mut rdr, &path, &FEATURE_MANIFEST_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(&path))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(DataError::malformed(&path, line, "expected 3 fields"));
        }
        let maintenance = Maintenance::parse(&rec[1])
            .ok_or_else(|| DataError::malformed(&path, line, format!("unknown maintenance `{}`", &rec[1])))?;
        out.push(RunMeta {
            id: rec[0].trim().to_string(),
            maintenance,
            duration_hours: parse_f64(&rec[2], &path, line, "duration")?,
        });
    }
    Ok(out)
}

pub fn read_features(dir: &Path) -> Result<Vec<FeatureMatrix>, DataError> {
    let metas = read_feature_manifest(dir)?;
    let registry = dir.join("features.txt");
    let names: Vec<String> = fs::read_to_string(&registry)
        .map_err(DataError::io(&registry))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect();
    let mut out = Vec::with_capacity(metas.len());
    for meta in metas {
        let path = dir.join(format!("{}.csv", meta.id));
        let mut rdr = reader(&path)?;
        let header = rdr.headers().map_err(csv_err(&path))?.clone();
        let n = names.len();
        let labelled = header.len() == n + 2 && &header[n + 1] == "label";
        let mut expected = vec!["hours_since_start"];
        expected.extend(names.iter().map(String::as_str));
        if labelled {
            expected.push("label");
        }
        check_header(&mut rdr, &path, &expected)?;
        let mut hours = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err(&path))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != expected.len() {
                return Err(DataError::malformed(&path, line, format!("expected {} fields", expected.len())));
            }
            hours.push(parse_f64(&rec[0], &path, line, "hour")?);
            for c in 0..n {
                values.push(parse_f64(&rec[c + 1], &path, line, &names[c])?);
            }
        }
        let fm = FeatureMatrix::new(meta, hours, names.clone(), values)
            .map_err(|e| DataError::malformed(&path, 0, e))?;
        out.push(fm);
    }
    Ok(out)
}

// ---- selected features ----------------------------------------------------

pub fn write_selected(path: &Path, selected: &[String], scores: &ProgScores) -> Result<(), DataError> {
    let mut w = writer(path)?;
    w.write_record(["rank", "feature", "monotonicity", "trendability", "prognosability", "relevance"])
        .map_err(csv_err(path))?;
    for (rank, name) in selected.iter().enumerate() {
        let i = scores.index_of(name).ok_or_else(|| DataError::Inconsistent(format!("no score for `{name}`")))?;
        w.write_record([
            (rank + 1).to_string(),
            name.clone(),
            fmt_f64(scores.monotonicity[i]),
            fmt_f64(scores.trendability[i]),
            fmt_f64(scores.prognosability[i]),
            fmt_f64(scores.relevance[i]),
        ])
        .map_err(csv_err(path))?;
    }
    flush(w, path)
}

// ---- fold artifacts -------------------------------------------------------

/// Versioned model document: the fitted scaler, selected features and
/// level-1 model of one outer fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub formulation: Formulation,
    pub feature_names: Vec<String>,
    pub pipeline: TrainedPipeline,
}

impl ModelDocument {
    pub fn new(pipeline: &TrainedPipeline) -> Self {
        ModelDocument {
            format_version: FORMAT_VERSION,
            formulation: pipeline.formulation.clone(),
            feature_names: pipeline.preprocessor.selected().to_vec(),
            pipeline: pipeline.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let doc: ModelDocument = read_json(path)?;
        if doc.format_version != FORMAT_VERSION {
            return Err(DataError::Inconsistent(format!(
                "{}: unsupported format version {}",
                path.display(),
                doc.format_version
            )));
        }
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenRule {
    pub aggregation: String,
    pub rule: AlarmRule,
    pub validation_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChosenParams {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub inner_ids: Vec<String>,
    pub hyperparams: Option<Hyperparams>,
    pub hyperparams_label: String,
    pub inner_metric: Option<f64>,
    pub selected_features: Vec<String>,
    pub rules: Vec<ChosenRule>,
    pub error: Option<String>,
}

impl ChosenParams {
    /// Summarises the per-aggregation results of one fold.
    pub fn new(per_g: &[&FoldResult]) -> Self {
        let f = per_g[0];
        ChosenParams {
            fold: f.fold,
            test_ids: f.test_ids.clone(),
            inner_ids: f.inner_ids.clone(),
            hyperparams: f.hyperparams,
            hyperparams_label: f.hyperparams.map_or_else(|| "-".to_string(), |h| h.to_string()),
            inner_metric: f.inner_metric,
            selected_features: f.pipeline.as_ref().map_or_else(Vec::new, |p| p.preprocessor.selected().to_vec()),
            rules: per_g
                .iter()
                .filter_map(|r| {
                    Some(ChosenRule {
                        aggregation: r.rule?.aggregation().to_string(),
                        rule: r.rule?,
                        validation_objective: r.validation_objective?,
                    })
                })
                .collect(),
            error: f.error.clone(),
        }
    }
}

pub fn write_alarms(path: &Path, outcomes: &[RunOutcome]) -> Result<(), DataError> {
    let mut w = writer(path)?;
    w.write_record(["run_id", "alarm_hours_since_start", "lead_days"]).map_err(csv_err(path))?;
    for o in outcomes {
        w.write_record([
            o.run_id.clone(),
            o.alarm_hour.map(fmt_f64).unwrap_or_default(),
            o.lead_days.map(fmt_f64).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    flush(w, path)
}

/// Long table of indicator values: one row per run and hour, one column
/// per indicator series.
pub fn write_indicators(path: &Path, indicators: &[RunIndicator], hours: impl Fn(&str) -> Vec<f64>) -> Result<(), DataError> {
    let width = indicators.iter().map(|r| r.series.len()).max().unwrap_or(1);
    let mut w = writer(path)?;
    let mut header = vec!["run_id".to_string(), "hours_since_start".to_string()];
    header.extend((0..width).map(|k| format!("h{k}")));
    w.write_record(&header).map_err(csv_err(path))?;
    for ri in indicators {
        let hrs = hours(&ri.run_id);
        let n = ri.series.first().map_or(0, Vec::len);
        for t in 0..n {
            let mut rec = vec![ri.run_id.clone(), hrs.get(t).map_or_else(|| t.to_string(), |h| fmt_f64(*h))];
            rec.extend(ri.series.iter().map(|s| fmt_f64(s[t])));
            w.write_record(&rec).map_err(csv_err(path))?;
        }
    }
    flush(w, path)
}

pub fn read_indicators(path: &Path) -> Result<Vec<(RunIndicator, Vec<f64>)>, DataError> {
    let mut rdr = reader(path)?;
    let width = rdr.headers().map_err(csv_err(path))?.len().saturating_sub(2);
    let mut out: Vec<(RunIndicator, Vec<f64>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err(path))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width + 2 {
            return Err(DataError::malformed(path, line, format!("expected {} fields", width + 2)));
        }
        let id = &rec[0];
        if out.last().is_none_or(|(ri, _)| ri.run_id != id) {
            out.push((RunIndicator { run_id: id.to_string(), series: vec![Vec::new(); width] }, Vec::new()));
        }
        let (ri, hours) = out.last_mut().unwrap();
        hours.push(parse_f64(&rec[1], path, line, "hour")?);
        for k in 0..width {
            ri.series[k].push(parse_f64(&rec[k + 2], path, line, "indicator")?);
        }
    }
    Ok(out)
}

// ---- reports --------------------------------------------------------------

/// Fold summary kept in `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_ids: Vec<String>,
    pub hyperparams: Option<Hyperparams>,
    pub rule: Option<AlarmRule>,
    pub validation_objective: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub formulation: String,
    pub formulation_spec: Formulation,
    pub aggregation: String,
    pub report: ScoreReport,
    pub folds: Vec<FoldSummary>,
}

impl ReportEntry {
    pub fn new(r: &CvResult) -> Self {
        ReportEntry {
            formulation: r.formulation.to_string(),
            formulation_spec: r.formulation.clone(),
            aggregation: r.aggregation.to_string(),
            report: r.report.clone(),
            folds: r
                .folds
                .iter()
                .map(|f| FoldSummary {
                    fold: f.fold,
                    test_ids: f.test_ids.clone(),
                    hyperparams: f.hyperparams,
                    rule: f.rule,
                    validation_objective: f.validation_objective,
                    error: f.error.clone(),
                })
                .collect(),
        }
    }

    /// Aggregation family and horizon columns of the report table.
    pub fn g_and_h(&self) -> (String, String) {
        let g = &self.aggregation;
        let digits = g.find(|c: char| c.is_ascii_digit());
        match digits {
            None => (g.clone(), String::new()),
            Some(i) => {
                let family = &g[..i];
                let rest = &g[i..];
                let h: String = rest.chars().take_while(char::is_ascii_digit).collect();
                let suffix = rest[h.len()..].trim_start_matches('h');
                (format!("{family}{suffix}"), h)
            }
        }
    }

    /// Final score recomputed from the stored counts and business mean.
    pub fn recomputed_final(&self, beta: f64, alpha: f64) -> Result<f64, DataError> {
        let r = &self.report;
        let f = f_score(r.fp, r.tp, r.corrective, r.preventive, beta).map_err(|e| DataError::Inconsistent(e.to_string()))?;
        Ok(final_score(f, r.business_mean, alpha, r.corrective, r.preventive))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub format_version: u32,
    pub seed: u64,
    pub beta: f64,
    pub alpha: f64,
    pub entries: Vec<ReportEntry>,
}

pub const REPORT_HEADER: [&str; 10] =
    ["formulation", "g", "H", "FP", "TP", "C", "P", "B_score", "F_score", "final_score"];

pub fn write_report_csv(path: &Path, entries: &[ReportEntry]) -> Result<(), DataError> {
    let mut w = writer(path)?;
    w.write_record(REPORT_HEADER).map_err(csv_err(path))?;
    for e in entries {
        let (g, h) = e.g_and_h();
        let r = &e.report;
        w.write_record([
            e.formulation.clone(),
            g,
            h,
            r.fp.to_string(),
            r.tp.to_string(),
            r.corrective.to_string(),
            r.preventive.to_string(),
            fmt_f64(r.business_mean),
            fmt_f64(r.f_score),
            fmt_f64(r.final_score),
        ])
        .map_err(csv_err(path))?;
    }
    flush(w, path)
}
